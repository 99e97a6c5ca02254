"""Pixel antennas and port-selection fluid antennas.

Each feed ``p`` drives a sub-panel of ``N_tx,p`` pixels and can select one of
``N_sub`` excitation patterns (columns of ``D_p``). The antenna-domain
precoder is ``F_ra = D_ra S_ra`` with ``D_ra = blkdiag(D_p)`` and a one-hot
block-diagonal selection matrix ``S_ra``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .core import ChannelTensor, FrontEnd
from .exceptions import DimensionError, InvalidParameterError

__all__ = [
    "StateDictionary",
    "SelectionState",
    "selection_matrix",
    "fra_from_selection",
    "effective_channel",
    "nearest_state",
    "radiated_power",
    "binary_dictionary",
    "load_dictionary",
    "save_dictionary",
    "PixelFrontEnd",
]


def _normalize_columns(D: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(D, axis=0)
    if np.any(n == 0):
        raise InvalidParameterError("dictionary columns must be nonzero", "pixel_fas")
    return D / n


@dataclass(frozen=True)
class StateDictionary:
    """Per-feed excitation dictionaries.

    Attributes
    ----------
    patterns : tuple of ndarray
        ``D_p`` with shape ``(N_tx_p, N_sub)``; columns are unit-norm.
    efficiency : ndarray, shape (N_p, N_sub)
        Realized efficiency of each state, in (0, 1].
    admissible : tuple of tuple of int
        Allowed state indices per feed.
    """

    patterns: tuple
    efficiency: Optional[np.ndarray] = None
    admissible: Optional[tuple] = None

    def __post_init__(self):
        pats = []
        n_sub = None
        for D in self.patterns:
            D = np.atleast_2d(np.asarray(D, dtype=complex))
            if n_sub is None:
                n_sub = D.shape[1]
            elif D.shape[1] != n_sub:
                raise DimensionError("all feeds must expose the same number of states", "pixel_fas")
            D = _normalize_columns(D)
            D.setflags(write=False)
            pats.append(D)
        if not pats:
            raise DimensionError("dictionary needs at least one feed", "pixel_fas")
        object.__setattr__(self, "patterns", tuple(pats))
        eta = np.ones((len(pats), n_sub)) if self.efficiency is None else np.asarray(self.efficiency, float)
        if eta.shape != (len(pats), n_sub):
            raise DimensionError(f"efficiency table must be {(len(pats), n_sub)}", "pixel_fas")
        if np.any(eta <= 0) or np.any(eta > 1):
            raise InvalidParameterError("state efficiencies must lie in (0, 1]", "pixel_fas")
        eta = eta.copy()
        eta.setflags(write=False)
        object.__setattr__(self, "efficiency", eta)
        if self.admissible is None:
            adm = tuple(tuple(range(n_sub)) for _ in pats)
        else:
            adm = tuple(tuple(int(i) for i in s) for s in self.admissible)
            if len(adm) != len(pats):
                raise DimensionError("one admissible set per feed expected", "pixel_fas")
            for s in adm:
                if not s or min(s) < 0 or max(s) >= n_sub:
                    raise InvalidParameterError("admissible sets must be nonempty and in range", "pixel_fas")
        object.__setattr__(self, "admissible", adm)

    @property
    def num_feeds(self) -> int:
        return len(self.patterns)

    @property
    def num_states(self) -> int:
        return self.patterns[0].shape[1]

    @property
    def num_elements(self) -> int:
        return sum(D.shape[0] for D in self.patterns)

    def block(self) -> np.ndarray:
        """``D_ra = blkdiag(D_0, ..., D_{N_p-1})``."""
        return sla.block_diag(*self.patterns)

    def column(self, p: int, n: int) -> np.ndarray:
        """Full-length column for feed ``p`` in state ``n`` (zeros outside sub-panel p)."""
        out = np.zeros(self.num_elements, dtype=complex)
        r0 = sum(D.shape[0] for D in self.patterns[:p])
        D = self.patterns[p]
        out[r0:r0 + D.shape[0]] = D[:, n]
        return out


@dataclass(frozen=True)
class SelectionState:
    indices: tuple

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)


def selection_matrix(state, N_sub: int) -> np.ndarray:
    """Block-diagonal one-hot selection matrix of shape ``(N_p N_sub, N_p)``."""
    idx = tuple(state)
    S = np.zeros((len(idx) * N_sub, len(idx)))
    for p, n in enumerate(idx):
        if not 0 <= n < N_sub:
            raise InvalidParameterError(f"state index {n} out of range for feed {p}", "pixel_fas")
        S[p * N_sub + n, p] = 1.0
    return S


def fra_from_selection(dictionary: StateDictionary, state) -> np.ndarray:
    """``F_ra = D_ra S_ra``; column ``p`` equals ``d_{p, n_p}``."""
    idx = tuple(state)
    if len(idx) != dictionary.num_feeds:
        raise DimensionError(f"state has {len(idx)} entries, dictionary has {dictionary.num_feeds} feeds",
                             "pixel_fas")
    return dictionary.block() @ selection_matrix(idx, dictionary.num_states)


def effective_channel(H_k, F_ra) -> np.ndarray:
    H_k = np.atleast_2d(np.asarray(H_k, dtype=complex))
    F_ra = np.atleast_2d(np.asarray(F_ra, dtype=complex))
    if H_k.shape[1] != F_ra.shape[0]:
        raise DimensionError(f"channel has {H_k.shape[1]} columns, F_ra has {F_ra.shape[0]} rows", "pixel_fas")
    return H_k @ F_ra


def nearest_state(dictionary: StateDictionary, F_ra) -> SelectionState:
    """Per-feed closest admissible dictionary column; ties go to the smallest index."""
    F_ra = np.atleast_2d(np.asarray(F_ra, dtype=complex))
    if F_ra.shape != (dictionary.num_elements, dictionary.num_feeds):
        raise DimensionError(f"F_ra must be {(dictionary.num_elements, dictionary.num_feeds)}", "pixel_fas")
    out = []
    for p in range(dictionary.num_feeds):
        best, best_d = None, np.inf
        for n in sorted(dictionary.admissible[p]):
            d = float(np.sum(np.abs(F_ra[:, p] - dictionary.column(p, n)) ** 2))
            if d < best_d:
                best, best_d = n, d
        out.append(best)
    return SelectionState(tuple(out))


def radiated_power(dictionary: StateDictionary, state, F_ana, F_dig, mode: str = "exact") -> float:
    """Radiated power with state-dependent efficiency.

    ``exact``: ``Tr(F_dig^H F_ana^H diag(eta_sel) F_ana F_dig)``.
    ``simplified``: ``mean(eta_sel) ||F_ana F_dig||_F^2``.
    """
    idx = tuple(state)
    eta = np.array([dictionary.efficiency[p, n] for p, n in enumerate(idx)])
    if np.any(eta <= 0) or np.any(eta > 1):
        raise InvalidParameterError("state efficiencies must lie in (0, 1]", "pixel_fas")
    F = np.asarray(F_ana, dtype=complex) @ np.asarray(F_dig, dtype=complex)
    if F.shape[0] != eta.size:
        raise DimensionError(f"precoder drives {F.shape[0]} feeds, state has {eta.size}", "pixel_fas")
    row_pow = np.sum(np.abs(F) ** 2, axis=1)
    if mode == "exact":
        return float(np.sum(eta * row_pow))
    if mode == "simplified":
        return float(np.mean(eta) * np.sum(row_pow))
    raise InvalidParameterError(f"unknown power mode {mode!r}", "pixel_fas")


def binary_dictionary(patterns: Sequence, efficiency=None, admissible=None) -> StateDictionary:
    """Dictionary from 0/1 pixel activation patterns (auto-normalized).

    ``patterns[p]`` is an ``(N_tx_p, N_sub)`` binary matrix.
    """
    pats = []
    for B in patterns:
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if not np.all((B == 0) | (B == 1)):
            raise InvalidParameterError("binary patterns must contain only 0 and 1", "pixel_fas")
        pats.append(B.astype(complex))
    return StateDictionary(tuple(pats), efficiency, admissible)


def save_dictionary(dictionary: StateDictionary, path) -> None:
    """Write a dictionary as CSV with columns feed,state,element,re,im,eta."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feed", "state", "element", "re", "im", "eta"])
        for p, D in enumerate(dictionary.patterns):
            for n in range(D.shape[1]):
                for e in range(D.shape[0]):
                    w.writerow([p, n, e, repr(float(D[e, n].real)), repr(float(D[e, n].imag)),
                                repr(float(dictionary.efficiency[p, n]))])


def load_dictionary(path, admissible=None) -> StateDictionary:
    """Read the tabular dictionary format written by :func:`save_dictionary`."""
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append((int(r["feed"]), int(r["state"]), int(r["element"]),
                         complex(float(r["re"]), float(r["im"])), float(r["eta"])))
    if not rows:
        raise InvalidParameterError(f"dictionary file {path} is empty", "pixel_fas")
    n_feed = max(r[0] for r in rows) + 1
    n_state = max(r[1] for r in rows) + 1
    n_el = [0] * n_feed
    for f, s, e, v, eta in rows:
        n_el[f] = max(n_el[f], e + 1)
    pats = [np.zeros((n_el[f], n_state), complex) for f in range(n_feed)]
    eta_tab = np.full((n_feed, n_state), np.nan)
    for f, s, e, v, eta in rows:
        pats[f][e, s] = v
        eta_tab[f, s] = eta
    if np.any(np.isnan(eta_tab)):
        raise InvalidParameterError("dictionary file is missing states", "pixel_fas")
    return StateDictionary(tuple(pats), eta_tab, admissible)


class PixelFrontEnd(FrontEnd):
    """Pixel/FAS front end: ``H_eff,k = H_k F_ra`` with discrete states."""

    def __init__(self, channel: ChannelTensor, dictionary: StateDictionary, state, power_mode: str = "exact"):
        self.channel = channel
        self.dictionary = dictionary
        self.state = SelectionState(tuple(state))
        self.power_mode = power_mode
        self._F = fra_from_selection(dictionary, self.state)
        if channel.shape[1] != dictionary.num_elements:
            raise DimensionError("channel columns must equal the number of pixels", "pixel_fas")

    @property
    def num_subcarriers(self):
        return self.channel.num_subcarriers

    def precoder(self, k):
        return self._F

    def effective_channel(self, k):
        return effective_channel(self.channel[k], self._F)

    def radiated_power(self, k, F_ana, F_dig):
        return radiated_power(self.dictionary, self.state, F_ana, F_dig, self.power_mode)

    def power_weight(self, k):
        eta = np.array([self.dictionary.efficiency[p, n] for p, n in enumerate(self.state)])
        if self.power_mode == "simplified":
            return np.mean(eta) * np.eye(eta.size)
        return np.diag(eta).astype(complex)

    def is_feasible(self):
        return all(n in self.dictionary.admissible[p] for p, n in enumerate(self.state))

    def parameter_grid(self):
        return [np.array(sorted(s)) for s in self.dictionary.admissible]

    def parameters(self):
        return np.array(self.state.indices)

    def with_parameters(self, values):
        return PixelFrontEnd(self.channel, self.dictionary, tuple(int(v) for v in values), self.power_mode)
