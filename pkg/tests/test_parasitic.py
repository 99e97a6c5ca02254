import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trihybrid.core import ChannelTensor
from trihybrid.exceptions import InvalidParameterError, PassivityError, SingularConfigurationError
from trihybrid.parasitic import (
    ImpedanceSet,
    ParasiticFrontEnd,
    ParasiticLoads,
    effective_channel,
    effective_impedance,
    parasitic_precoder,
    radiated_power,
    scalar_weight_locus,
    synthesize_impedance_set,
)

from conftest import crandn


class TestPrecoder:
    def test_scalar(self):
        assert parasitic_precoder([[50.0]], [50.0])[0, 0] == pytest.approx(0.01)

    def test_diagonal(self):
        F = parasitic_precoder(np.diag([10.0, 20.0]), [5.0, 5.0j])
        assert np.allclose(F, np.diag([1 / 15, 1 / (20 + 5j)]))

    def test_multiply_back(self, rng):
        Z = crandn(rng, 3, 3) * 10 + 30 * np.eye(3)
        zr = rng.uniform(1, 5, 3) + 1j * rng.uniform(-50, 50, 3)
        F = parasitic_precoder(Z, zr)
        assert np.allclose(F @ (Z + np.diag(zr)), np.eye(3), atol=1e-10)

    def test_singular(self):
        with pytest.raises(SingularConfigurationError):
            parasitic_precoder([[1.0, 1.0], [1.0, 1.0]], [0.0, 0.0])

    def test_passive_loads(self):
        with pytest.raises(InvalidParameterError):
            ParasiticLoads([-1.0 + 0j])


class TestEffectiveChannel:
    def test_no_parasitic_coupling(self, rng):
        Z_RA = crandn(rng, 2, 3)
        assert np.allclose(effective_channel(Z_RA, np.zeros((2, 4)), crandn(rng, 4, 4), crandn(rng, 4, 3)), Z_RA)

    def test_zero_precoder(self, rng):
        Z_RA = crandn(rng, 2, 3)
        assert np.allclose(effective_channel(Z_RA, crandn(rng, 2, 4), np.zeros((4, 4)), crandn(rng, 4, 3)), Z_RA)

    def test_scalar(self):
        assert effective_channel(1.0, 1.0, 0.5, 1.0)[0, 0] == pytest.approx(0.5)

    def test_no_parasitics_reduction(self, rng):
        Z_RA = crandn(rng, 2, 3)
        assert np.array_equal(effective_channel(Z_RA, np.zeros((2, 0)), np.zeros((0, 0)), np.zeros((0, 3))), Z_RA)


class TestPower:
    def test_frobenius_reduction(self, rng):
        Fa, Fd = crandn(rng, 3, 2), crandn(rng, 2, 2)
        Z_A = np.eye(3) + 1j * rng.normal(size=(3, 3))
        p = radiated_power(Z_A, crandn(rng, 2, 3), crandn(rng, 2, 2), np.zeros((2, 2)), Fa, Fd)
        assert p == pytest.approx(np.linalg.norm(Fa @ Fd) ** 2, rel=1e-12)

    def test_zero_digital(self, rng):
        imp = synthesize_impedance_set(rng, 2, 3)
        F = parasitic_precoder(imp.Z_P[0], [1 + 10j] * 3)
        assert radiated_power(imp.Z_A[0], imp.Z_m[0], imp.Z_P[0], F, np.eye(2), np.zeros((2, 1))) == 0.0

    def test_scalar_expansion(self):
        a, m, p, f = 2.0, 1.0, 3.0, 0.25
        oracle = a - 2 * m * m * f + m * m * f * f * p
        assert effective_impedance(a, m, p, f)[0, 0] == pytest.approx(oracle)
        assert radiated_power(a, m, p, f, 1.0, 1.0) == pytest.approx(oracle)

    def test_negative_power_flagged(self):
        with pytest.raises(PassivityError):
            radiated_power(-1.0, 0.0, 1.0, 0.0, 1.0, 1.0)

    def test_passivity_random(self, rng):
        # 1000 random precoders on synthesized passive sets
        for trial in range(10):
            imp = synthesize_impedance_set(rng, 3, 4)
            loads = ParasiticLoads.from_reactance(rng.uniform(-100, 100, 4), rng.uniform(0, 5))
            F = parasitic_precoder(imp.Z_P[0], loads)
            for _ in range(100):
                Fa, Fd = crandn(rng, 3, 2), crandn(rng, 2, 2)
                assert radiated_power(imp.Z_A[0], imp.Z_m[0], imp.Z_P[0], F, Fa, Fd) >= -1e-9


class TestLocus:
    def test_max_at_zero(self):
        w = scalar_weight_locus(50.0, np.linspace(-500, 500, 1001))
        assert np.argmax(np.abs(w)) == 500 and w[500] == pytest.approx(1 / 50)

    def test_limit(self):
        assert abs(scalar_weight_locus(50.0, [1e12])[0]) < 1e-11

    def test_nonpositive_R(self):
        with pytest.raises(InvalidParameterError):
            scalar_weight_locus(0.0, [1.0])

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-2, 1e3), st.floats(-1e4, 1e4))
    def test_circle(self, R, X):
        w = scalar_weight_locus(R, [X])[0]
        assert abs(abs(w - 1 / (2 * R)) - 1 / (2 * R)) < 1e-12


class TestFrontEnd:
    def test_contract(self, rng):
        imp = synthesize_impedance_set(rng, 2, 3, 2, K=2)
        fe = ParasiticFrontEnd(imp, np.zeros(3))
        assert fe.is_feasible()
        W = fe.power_weight(0)
        Fd = crandn(rng, 2, 1)
        assert np.real(np.trace(Fd.conj().T @ W @ Fd)) == pytest.approx(fe.radiated_power(0, np.eye(2), Fd))
        assert fe.effective_channel(1).shape == (2, 2)
        assert not fe.with_parameters([0, 0, 1e4]).is_feasible()

    def test_impedance_dims(self, rng):
        with pytest.raises(Exception):
            ImpedanceSet(crandn(rng, 1, 2, 2), crandn(rng, 1, 2, 3), crandn(rng, 1, 2, 2), crandn(rng, 1, 2, 2),
                         crandn(rng, 1, 3, 2))
