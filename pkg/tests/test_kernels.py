import numpy as np
import pytest

from trihybrid import kernels
from trihybrid.exceptions import InvalidParameterError

pytestmark = pytest.mark.skipif(len(kernels.available_backends()) < 2, reason="compiled kernels not built")


def both():
    return kernels.get_backend("cython"), kernels.get_backend("python")


def test_lorentzian_chain_agree(rng):
    c, p = both()
    z = rng.uniform(-np.pi, np.pi, (64, 24))
    z[0] = -np.pi
    for nu in (0.1, 0.6, 1.0):
        wc, sc = c.lorentzian_chain(z, nu, 6)
        wp, sp = p.lorentzian_chain(z, nu, 6)
        assert np.allclose(wc, wp, rtol=1e-13, atol=1e-15)
        assert np.allclose(sc, sp, rtol=1e-13, atol=1e-15)
    assert np.all(wc[0] == 0)


def test_pinch_amplitudes_agree(rng):
    c, p = both()
    d = rng.uniform(0.01, 0.99, (100, 9))
    assert np.allclose(c.pinch_amplitudes(d), p.pinch_amplitudes(d), rtol=1e-14, atol=0)


def test_phi_sum_agree(rng):
    c, p = both()
    al = rng.uniform(0.05, 12.5, 50)
    for gap in (0.0, 0.01):
        a = c.phi_sum(al, 2 * np.pi, 0.01, 0.5, gap, 256)
        b = p.phi_sum(al, 2 * np.pi, 0.01, 0.5, gap, 256)
        assert np.allclose(a, b, rtol=1e-10, atol=0)


def test_read_only_inputs(rng):
    c, _ = both()
    z = rng.uniform(-np.pi, np.pi, (2, 4))
    z.setflags(write=False)
    c.lorentzian_chain(z, 0.5, 4)


def test_selection():
    assert kernels.BACKEND in kernels.available_backends()
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
