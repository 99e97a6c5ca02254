import itertools

import numpy as np
import pytest

from trihybrid.core import ChannelTensor
from trihybrid.exceptions import DimensionError, InvalidParameterError
from trihybrid.pixel_fas import (
    PixelFrontEnd,
    SelectionState,
    StateDictionary,
    binary_dictionary,
    effective_channel,
    fra_from_selection,
    load_dictionary,
    nearest_state,
    radiated_power,
    save_dictionary,
    selection_matrix,
)

from conftest import crandn


def random_dict(rng, n_p, n_sub, n_tx=3):
    pats = [crandn(rng, n_tx, n_sub) for _ in range(n_p)]
    eta = rng.uniform(0.2, 1.0, (n_p, n_sub))
    return StateDictionary(tuple(pats), eta)


class TestSelection:
    def test_single(self):
        assert np.array_equal(selection_matrix((1,), 2), [[0], [1]])

    def test_two_feeds(self):
        S = selection_matrix((0, 1), 2)
        assert S.shape == (4, 2) and S[0, 0] == 1 and S[3, 1] == 1 and S.sum() == 2

    def test_structure(self, rng):
        S = selection_matrix((2, 0, 1), 3)
        assert np.all(S.sum(0) == 1) and set(S.sum(1)) <= {0, 1}
        assert np.array_equal(S.T @ S, np.eye(3))

    def test_out_of_range(self):
        with pytest.raises(InvalidParameterError):
            selection_matrix((3,), 3)


class TestFra:
    def test_single_feed(self, rng):
        d = random_dict(rng, 1, 4)
        assert np.allclose(fra_from_selection(d, (2,))[:, 0], d.patterns[0][:, 2])

    def test_binary_normalized(self):
        d = binary_dictionary([np.array([[1], [1], [0]])])
        assert np.allclose(fra_from_selection(d, (0,))[:, 0], [1 / np.sqrt(2), 1 / np.sqrt(2), 0])

    def test_block_structure(self, rng):
        d = random_dict(rng, 2, 3)
        F = fra_from_selection(d, (1, 2))
        assert np.all(F[3:, 0] == 0) and np.all(F[:3, 1] == 0)
        assert np.allclose(np.linalg.norm(F, axis=0), 1.0)

    def test_dimension(self, rng):
        with pytest.raises(DimensionError):
            fra_from_selection(random_dict(rng, 2, 3), (0,))


class TestEffectiveChannel:
    def test_standard_basis(self, rng):
        d = StateDictionary((np.eye(3)[:, [0]], np.eye(3)[:, [0]]))
        H = crandn(rng, 2, 6)
        assert np.allclose(effective_channel(H, fra_from_selection(d, (0, 0))), H[:, [0, 3]])

    def test_identity_channel(self, rng):
        d = random_dict(rng, 2, 2)
        F = fra_from_selection(d, (1, 0))
        assert np.allclose(effective_channel(np.eye(6), F), F)

    def test_gather_oracle(self, rng):
        d = binary_dictionary([np.array([[1, 0], [1, 1], [0, 1]]), np.array([[1, 1], [0, 1]])])
        H = crandn(rng, 2, 5)
        out = effective_channel(H, fra_from_selection(d, (1, 1)))
        col0 = (H[:, 1] + H[:, 2]) / np.sqrt(2)
        col1 = (H[:, 3] + H[:, 4]) / np.sqrt(2)
        assert np.allclose(out, np.column_stack([col0, col1]))


class TestNearest:
    def test_round_trip_full_enumeration(self, rng):
        for n_p in range(1, 4):
            for n_sub in range(1, 5):
                d = random_dict(rng, n_p, n_sub)
                for st in itertools.product(range(n_sub), repeat=n_p):
                    assert nearest_state(d, fra_from_selection(d, st)).indices == st

    def test_noise_within_half_gap(self, rng):
        d = random_dict(rng, 2, 4)
        gap = min(np.linalg.norm(D[:, i] - D[:, j]) for D in d.patterns
                  for i in range(4) for j in range(4) if i != j)
        F = fra_from_selection(d, (3, 1))
        e = crandn(rng, *F.shape)
        e *= 0.49 * gap / np.linalg.norm(e, axis=0)
        assert nearest_state(d, F + e).indices == (3, 1)

    def test_tie_smallest_index(self):
        D = np.array([[1.0, 0.0, 0.0, -1.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]], dtype=complex)
        D[:, 1] = [0, 1, 0]
        D[:, 3] = [0, -1, 0]
        d = StateDictionary((D,))
        # equidistant from states 1 and 3
        assert nearest_state(d, np.array([[1.0], [0.0], [0.0]])).indices == (0,)
        assert nearest_state(d, np.array([[0.0], [0.0], [0.0]])).indices == (0,)
        d2 = StateDictionary((D,), admissible=((1, 3),))
        assert nearest_state(d2, np.array([[1.0], [0.0], [0.0]])).indices == (1,)


class TestPower:
    def test_unit_efficiency(self, rng):
        d = random_dict(rng, 2, 3)
        d = StateDictionary(d.patterns)
        Fa, Fd = crandn(rng, 2, 2), crandn(rng, 2, 1)
        assert radiated_power(d, (0, 1), Fa, Fd) == pytest.approx(np.linalg.norm(Fa @ Fd) ** 2)

    def test_uniform_efficiency(self, rng):
        d = StateDictionary(random_dict(rng, 2, 3).patterns, np.full((2, 3), 0.4))
        Fa, Fd = crandn(rng, 2, 2), crandn(rng, 2, 2)
        ref = 0.4 * np.linalg.norm(Fa @ Fd) ** 2
        assert radiated_power(d, (2, 0), Fa, Fd) == pytest.approx(ref)
        assert radiated_power(d, (2, 0), Fa, Fd, "simplified") == pytest.approx(ref)

    def test_diagonal_trace(self, rng):
        eta = np.array([[0.5, 0.9], [0.3, 1.0]])
        d = StateDictionary(random_dict(rng, 2, 2).patterns, eta)
        Fa = np.linalg.qr(crandn(rng, 2, 2))[0]
        Fd = crandn(rng, 2, 3)
        F = Fa @ Fd
        assert radiated_power(d, (0, 1), Fa, Fd) == pytest.approx(
            0.5 * np.linalg.norm(F[0]) ** 2 + 1.0 * np.linalg.norm(F[1]) ** 2)

    def test_bounds(self, rng):
        for _ in range(200):
            d = random_dict(rng, 3, 3)
            st = tuple(rng.integers(0, 3, 3))
            Fa, Fd = crandn(rng, 3, 2), crandn(rng, 2, 2)
            f2 = np.linalg.norm(Fa @ Fd) ** 2
            p = radiated_power(d, st, Fa, Fd)
            assert d.efficiency.min() * f2 - 1e-12 <= p <= d.efficiency.max() * f2 + 1e-12

    def test_bad_efficiency(self, rng):
        with pytest.raises(InvalidParameterError):
            StateDictionary(random_dict(rng, 1, 2).patterns, np.array([[0.0, 1.0]]))


def test_dictionary_file_round_trip(tmp_path, rng):
    d = random_dict(rng, 2, 3)
    p = tmp_path / "dict.csv"
    save_dictionary(d, p)
    d2 = load_dictionary(p)
    # columns are renormalized on load, so allow a few ulp
    assert all(np.allclose(a, b, rtol=0, atol=1e-15) for a, b in zip(d.patterns, d2.patterns))
    assert np.array_equal(d.efficiency, d2.efficiency)


def test_front_end(rng):
    d = random_dict(rng, 2, 3)
    H = ChannelTensor(crandn(rng, 2, 2, 6))
    fe = PixelFrontEnd(H, d, SelectionState((1, 2)))
    assert np.allclose(fe.effective_channel(1), H[1] @ fra_from_selection(d, (1, 2)))
    assert fe.is_feasible()
