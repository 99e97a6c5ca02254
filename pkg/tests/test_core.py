import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trihybrid.core import (
    ArrayDescriptor,
    ChannelTensor,
    FixedFrontEnd,
    FrontEnd,
    MultipathParams,
    NoiseModel,
    PathParams,
    PrecoderSet,
    check_power_budget,
    frobenius_matching,
    generate_channel,
    mutual_information,
    steering_vector,
    subcarrier_frequencies,
)
from trihybrid.exceptions import (
    DimensionError,
    InvalidGeometryError,
    InvalidParameterError,
    ModelError,
    PassivityError,
)

from conftest import crandn


def single():
    return ArrayDescriptor(np.zeros((1, 3)), 1.0)


def path(g=1.0, tau=0.0):
    return PathParams(g, tau, 0.0, 0.0, 0.0, 0.0)


class TestSteering:
    def test_single_element_origin(self):
        assert np.allclose(steering_vector(single(), 0.3, -0.2), [1.0])

    def test_broadside_all_ones(self):
        # elements in the y-z plane, propagation along x
        arr = ArrayDescriptor.uniform_planar(3, 2, 1.0)
        assert np.allclose(steering_vector(arr, 0.0, 0.0), np.ones(6), atol=1e-15)

    def test_half_wave_line_phases(self):
        arr = ArrayDescriptor.uniform_linear(4, 1.0)
        a = steering_vector(arr, np.deg2rad(30), 0.0)
        expected = np.exp(-1j * np.pi * np.arange(4) * 0.5)
        assert np.allclose(a, expected, atol=1e-12)

    def test_unit_modulus(self, rng):
        arr = ArrayDescriptor(rng.normal(size=(7, 3)), 0.3)
        a = steering_vector(arr, *rng.uniform(-1, 1, 2))
        assert np.allclose(np.abs(a), 1.0)

    def test_zero_wavelength(self):
        arr = ArrayDescriptor(np.zeros((1, 3)), 0.0)
        with pytest.raises(InvalidGeometryError):
            steering_vector(arr, 0.0, 0.0)

    def test_bad_positions(self):
        with pytest.raises(InvalidGeometryError):
            ArrayDescriptor(np.full((2, 3), np.nan), 1.0)


class TestChannel:
    def test_subcarrier_grid(self):
        f = subcarrier_frequencies(10.0, 4.0, 4)
        assert np.allclose(f, [8.0, 9.0, 10.0, 11.0])

    def test_single_path_unit(self):
        H = generate_channel(MultipathParams((path(),), 1e9, 1e8, 8), single(), single())
        assert np.allclose(H.matrices, 1.0)

    def test_zero_gain(self):
        H = generate_channel(MultipathParams((path(0.0), path(0.0, 1e-8)), 1e9, 1e8, 4), single(), single())
        assert np.all(H.matrices == 0)

    def test_two_paths_term_by_term(self):
        B, K = 1e8, 16
        g1, g2 = 0.7 - 0.2j, -0.3 + 0.5j
        H = generate_channel(MultipathParams((path(g1), path(g2, 1 / B)), 2e9, B, K), single(), single())
        f = subcarrier_frequencies(2e9, B, K)
        expected = g1 + g2 * np.exp(-2j * np.pi * f / B)
        assert np.allclose(H.matrices[:, 0, 0], expected, atol=1e-12)

    def test_empty_paths(self):
        with pytest.raises(InvalidParameterError):
            MultipathParams((), 1e9, 1e8, 4)

    def test_negative_delay(self):
        with pytest.raises(InvalidParameterError):
            MultipathParams((path(1.0, -1.0),), 1e9, 1e8, 4)

    def test_seed_determinism_and_rank_one(self):
        tx, rx = ArrayDescriptor.uniform_linear(4, 1.0), ArrayDescriptor.uniform_linear(3, 1.0)
        p = MultipathParams((PathParams(None, 1e-9, 0.3, 0.1, -0.2, 0.0),), 1e9, 1e8, 4)
        a = generate_channel(p, tx, rx, seed=5).matrices
        b = generate_channel(p, tx, rx, seed=5).matrices
        assert np.array_equal(a, b)
        s = np.linalg.svd(a, compute_uv=False)
        assert np.all(s[:, 1] < 1e-10 * s[:, 0])

    def test_nonfinite_rejected(self):
        with pytest.raises(ModelError):
            ChannelTensor(np.array([[[np.inf]]]))


class TestMutualInformation:
    def test_zero_precoder(self, rng):
        H = crandn(rng, 2, 3, 4)
        assert mutual_information(H, PrecoderSet(np.zeros((2, 4, 2))), NoiseModel(1.0)) == 0.0

    def test_scalar_closed_form(self):
        assert mutual_information(np.ones((1, 1, 1)), PrecoderSet(np.ones((1, 1, 1))), NoiseModel(1.0)) == \
            pytest.approx(1.0, abs=1e-14)

    def test_identical_subcarriers(self, rng):
        H1, F1 = crandn(rng, 1, 3, 4), crandn(rng, 1, 4, 2)
        one = mutual_information(H1, PrecoderSet(F1), NoiseModel(0.5))
        many = mutual_information(np.repeat(H1, 5, 0), PrecoderSet(np.repeat(F1, 5, 0)), NoiseModel(0.5))
        assert many == pytest.approx(one, rel=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            mutual_information(crandn(rng, 1, 2, 3), PrecoderSet(crandn(rng, 1, 4, 1)), NoiseModel(1.0))

    def test_noise_positive(self):
        with pytest.raises(InvalidParameterError):
            NoiseModel(0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(1.0, 10.0))
    def test_monotone_in_scale(self, seed, c):
        r = np.random.default_rng(seed)
        H, F = crandn(r, 2, 3, 3), crandn(r, 2, 3, 2)
        n = NoiseModel(1.0)
        assert mutual_information(H, PrecoderSet(c * F), n) >= mutual_information(H, PrecoderSet(F), n) - 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_unitary_invariance(self, seed):
        r = np.random.default_rng(seed)
        H, F = crandn(r, 2, 3, 4), crandn(r, 2, 4, 3)
        Q = np.linalg.qr(crandn(r, 3, 3))[0]
        n = NoiseModel(0.7)
        assert mutual_information(H, PrecoderSet(F @ Q), n) == pytest.approx(
            mutual_information(H, PrecoderSet(F), n), rel=1e-10, abs=1e-12)


class TestMatching:
    def test_exact_factorization(self, rng):
        Fra, Fa, Fd = crandn(rng, 2, 6, 4), crandn(rng, 2, 4, 3), crandn(rng, 2, 3, 2)
        assert frobenius_matching(Fra @ Fa @ Fd, PrecoderSet(Fd, Fa), Fra) < 1e-24

    def test_zero_target(self, rng):
        Fra, Fd = crandn(rng, 2, 3, 3), crandn(rng, 2, 3, 1)
        P = Fra @ Fd
        assert frobenius_matching(np.zeros_like(P), PrecoderSet(Fd), Fra) == pytest.approx(np.sum(np.abs(P) ** 2))

    def test_elementwise_oracle(self, rng):
        Fo, Fra, Fd = crandn(rng, 1, 2, 2), crandn(rng, 1, 2, 2), crandn(rng, 1, 2, 2)
        P = Fra[0] @ Fd[0]
        oracle = sum(abs(Fo[0, i, j] - P[i, j]) ** 2 for i in range(2) for j in range(2))
        assert frobenius_matching(Fo, PrecoderSet(Fd), Fra) == pytest.approx(oracle, rel=1e-13)

    def test_front_end_argument(self, rng):
        H = ChannelTensor(crandn(rng, 2, 2, 3))
        Fd = crandn(rng, 2, 3, 1)
        assert frobenius_matching(Fd, PrecoderSet(Fd), FixedFrontEnd(H)) < 1e-28

    def test_mismatch(self, rng):
        with pytest.raises(DimensionError):
            frobenius_matching(crandn(rng, 1, 3, 1), PrecoderSet(crandn(rng, 1, 2, 1)), crandn(rng, 1, 4, 2))

    def test_precoder_chain_checked(self, rng):
        with pytest.raises(DimensionError):
            PrecoderSet(crandn(rng, 1, 3, 1), crandn(rng, 1, 4, 2))


class TestPowerBudget:
    def test_zero(self):
        assert check_power_budget([0, 0, 0], 1.0)

    def test_over(self):
        assert not check_power_budget([0.5, 0.6], 1.0)

    def test_boundary_inclusive(self):
        assert check_power_budget([0.25] * 4, 1.0)

    def test_negative(self):
        with pytest.raises(PassivityError):
            check_power_budget([0.1, -0.1], 1.0)


class TestFrontEndContract:
    def test_default_power_weight_probe(self, rng):
        # quadratic model P = Tr(F^H W F) is recovered exactly by probing
        W = crandn(rng, 3, 3)
        W = W @ W.conj().T

        class Q(FixedFrontEnd):
            def radiated_power(self, k, F_ana, F_dig):
                F = F_ana @ F_dig
                return float(np.real(np.trace(F.conj().T @ W @ F)))

        fe = Q(ChannelTensor(crandn(rng, 1, 2, 3)))
        assert np.allclose(FrontEnd.power_weight(fe, 0), W, atol=1e-12)
