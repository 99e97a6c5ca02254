import math

import numpy as np
import pytest
from scipy import special

from trihybrid import kernels
from trihybrid.exceptions import ConvergenceError, DimensionError, InvalidParameterError, SingularConfigurationError
from trihybrid.wire import (
    WireGeometry,
    count_nulls,
    impedance_matrix,
    null_location,
    phi_kernel,
    phi_kernel_converged,
    port_impedance,
    port_impedances,
    port_loads,
    radiated_power,
    snr_field_map,
    wire_precoder,
    write_field_map,
)

from conftest import crandn

EULER = 0.57721566490153286


def _series(x, sign, nterms=60):
    # sum_k sign^k (x^2/4)^k / (k!)^2 and the harmonic-weighted companion
    s, sh, t, h = 0.0, 0.0, 1.0, 0.0
    for k in range(nterms):
        if k:
            t *= sign * (x * x / 4) / (k * k)
            h += 1.0 / k
        s += t
        sh += t * h
    return s, sh


def j0_ref(x):
    return _series(x, -1)[0]


def y0_ref(x):
    s, sh = _series(x, -1)
    return (2 / math.pi) * ((math.log(x / 2) + EULER) * s - sh)


def i0_ref(x):
    return _series(x, 1)[0]


def k0_ref(x):
    s, sh = _series(x, 1)
    return -(math.log(x / 2) + EULER) * s + sh


@pytest.mark.parametrize("x", [0.01, 0.1, 0.5, 1.0, 2.5])
def test_special_functions_match_series(x):
    assert special.j0(x) == pytest.approx(j0_ref(x), rel=1e-10)
    assert special.y0(x) == pytest.approx(y0_ref(x), rel=1e-10)
    assert special.i0(x) == pytest.approx(i0_ref(x), rel=1e-10)
    assert special.k0(x) == pytest.approx(k0_ref(x), rel=1e-10)


def ref_geom(**kw):
    base = dict(radius=0.01, spacing=0.5, wavelength=1.0, num_ports=8, excited=(0, 7), z_load=377.0)
    base.update(kw)
    return WireGeometry(**base)


def phi_term_oracle(alpha, geom, ell):
    al = alpha - 2 * math.pi * ell / geom.spacing
    b2 = geom.k0 ** 2 - al * al
    s = np.sinc(al * geom.gap / (2 * math.pi)) ** 2
    if b2 > 0:
        b = math.sqrt(b2)
        x = b * geom.radius
        return s / (b2 * j0_ref(x) * complex(j0_ref(x), -y0_ref(x)))
    g = math.sqrt(-b2)
    x = g * geom.radius
    return s / (b2 * (2j / math.pi) * i0_ref(x) * k0_ref(x))


class TestPhi:
    def test_termwise_oracle(self, backend):
        g = ref_geom()
        alpha = 1.3
        ref = sum(phi_term_oracle(alpha, g, l) for l in range(-3, 5))
        assert phi_kernel(alpha, g, 4) == pytest.approx(ref, rel=1e-9)

    def test_self_convergence(self, backend):
        g = ref_geom()
        al = np.linspace(0.1, 6.0, 7)
        phi, L, rel = phi_kernel_converged(al, g)
        assert rel < 1e-6
        assert np.max(np.abs(phi_kernel(al, g, L) - phi) / np.abs(phi)) < 1e-6

    def test_reflection_symmetry(self, backend):
        g = ref_geom()
        per = 2 * np.pi / g.spacing
        al = np.array([0.3, 1.7, 4.1, 9.0])
        assert np.allclose(phi_kernel(al, g, 64), phi_kernel(per - al, g, 64), rtol=1e-12)

    def test_term_decay_without_gap(self, backend):
        g = ref_geom(gap=0.0)
        mags = [abs(phi_kernel(0.7, g, L + 1) - phi_kernel(0.7, g, L)) for L in range(2, 40)]
        assert np.all(np.diff(mags) < 0)

    def test_zero_gap_diverges(self):
        with pytest.raises(ConvergenceError):
            phi_kernel_converged([1.0], ref_geom(gap=0.0))

    def test_grazing(self):
        g = ref_geom()
        with pytest.raises(SingularConfigurationError):
            phi_kernel(g.k0, g, 4)

    def test_bad_truncation(self):
        with pytest.raises(InvalidParameterError):
            phi_kernel(1.0, ref_geom(), 0)


class TestPortImpedance:
    def test_convergence(self):
        _, info = port_impedances(ref_geom(), 8, info=True)
        assert info["kernel_rel_change"] < 1e-6 and info["quad_rel_change"] < 1e-6

    def test_quadrature_doubling(self):
        g = ref_geom()
        a = port_impedances(g, 0, n0=64)[0]
        b = port_impedances(g, 0, n0=128)[0]
        assert abs(a - b) / abs(b) < 1e-6

    def test_decay(self):
        z = port_impedances(ref_geom(), 8)
        assert abs(z[8]) < abs(z[1])

    def test_z0_linear(self):
        g = ref_geom()
        z1 = port_impedances(g, 3)
        z2 = port_impedances(g.replace(Z0=2 * g.Z0), 3)
        assert np.allclose(z2, 2 * z1, rtol=1e-14, atol=0)

    def test_symmetric_index(self):
        g = ref_geom()
        assert port_impedance(-2, g) == port_impedance(2, g)


class TestMatrix:
    def test_single_port(self):
        g = ref_geom(num_ports=1, excited=(0,))
        Z = impedance_matrix(g)
        assert Z.shape == (1, 1) and Z[0, 0] == port_impedance(0, g)

    def test_toeplitz_symmetric(self):
        Z = impedance_matrix(ref_geom())
        assert np.array_equal(Z, Z.T)
        for d in range(8):
            assert np.all(np.diagonal(Z, d) == Z[0, d])

    def test_elementwise(self):
        g = ref_geom(num_ports=4, excited=(0,))
        Z = impedance_matrix(g)
        for i in range(4):
            for j in range(4):
                assert Z[i, j] == pytest.approx(port_impedance(abs(i - j), g), rel=1e-5)


class TestPrecoderPower:
    def test_diagonal(self):
        F = wire_precoder(np.diag([10.0, 20.0]), [5.0, 0.0])
        assert np.allclose(F, np.diag([1 / 15, 1 / 20]))

    def test_multiply_back(self):
        g = ref_geom()
        Z = impedance_matrix(g)
        F = wire_precoder(Z, port_loads(g))
        assert np.max(np.abs(F @ (Z + np.diag(port_loads(g))) - np.eye(8))) < 1e-10

    def test_load_changes_precoder(self):
        g = ref_geom()
        Z = impedance_matrix(g)
        F1 = wire_precoder(Z, port_loads(g))
        F2 = wire_precoder(Z, port_loads(g.replace(z_load=50.0)))
        assert not np.allclose(F1, F2)

    def test_singular(self):
        with pytest.raises(SingularConfigurationError):
            wire_precoder(np.ones((2, 2)), [0.0, 0.0])

    def test_real_diagonal(self, rng):
        Fa, Fd = crandn(rng, 3, 2), crandn(rng, 2, 1)
        assert radiated_power(4.0 * np.eye(3), Fa, Fd) == pytest.approx(np.linalg.norm(Fa @ Fd) ** 2 / 4)

    def test_zero(self):
        assert radiated_power(np.eye(2), np.zeros((2, 1)), np.ones((1, 1))) == 0

    def test_passive(self, rng):
        Z = impedance_matrix(ref_geom())
        for _ in range(200):
            assert radiated_power(Z, crandn(rng, 8, 2), crandn(rng, 2, 2)) >= -1e-9

    def test_mismatch(self):
        with pytest.raises(DimensionError):
            radiated_power(np.eye(3), np.eye(2), np.eye(2))


class TestFieldMap:
    z = np.linspace(-1.75, 1.75, 71)
    r = np.array([0.1, 0.25, 0.5])

    def test_noise_scaling(self):
        g = ref_geom()
        a = snr_field_map(g, self.z, self.r, 1e-10)
        b = snr_field_map(g, self.z, self.r, 2e-10)
        assert np.allclose(b, a / 2, rtol=1e-14)

    def test_mirror_symmetry(self):
        g = ref_geom()
        s = snr_field_map(g, self.z, self.r, 1.0)
        assert np.max(np.abs(s - s[:, ::-1])) <= 1e-10 * np.max(s)

    def test_two_ports_fewer_nulls(self):
        one = count_nulls(snr_field_map(ref_geom(excited=(0,)), self.z, self.r))
        two = count_nulls(snr_field_map(ref_geom(), self.z, self.r))
        assert two < one

    def test_load_shifts_null_on_fine_grid(self):
        zf = np.linspace(0.1, 0.4, 3001)
        locs = [zf[null_location(snr_field_map(ref_geom(z_load=zl), zf, self.r[:1]))] for zl in (377.0, 50.0)]
        assert locs[0] != locs[1]

    def test_port_point_masked(self):
        g = ref_geom(num_ports=2, excited=(0,))
        s = snr_field_map(g, [-0.25, 0.0], [0.0])
        assert np.isnan(s[0, 0]) and np.isfinite(s[0, 1])

    def test_empty_grid(self):
        with pytest.raises(InvalidParameterError):
            snr_field_map(ref_geom(), [], [0.1])

    def test_csv(self, tmp_path):
        s = snr_field_map(ref_geom(), self.z[:3], self.r[:1])
        p = tmp_path / "map.csv"
        write_field_map(p, s, self.z[:3], self.r[:1], 1.0)
        lines = p.read_text().splitlines()
        assert lines[0] == "z_over_lambda,r_over_lambda,snr_db" and len(lines) == 4
