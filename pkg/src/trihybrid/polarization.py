"""Polarization-reconfigurable arrays over unpolarized 2x2-block channels.

Each antenna ``n`` radiates with polarization vector
``p_n = sqrt(gamma_n) [cos(theta_n), sin(theta_n) e^{j psi_n}]`` in the
(H, V) basis. The antenna-domain precoder stacks these vectors
block-diagonally, and ``H_eff = W_ra^H H_up F_ra``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .core import ArrayDescriptor, ChannelTensor, FrontEnd, steering_vector, subcarrier_frequencies
from .exceptions import DimensionError, InvalidParameterError

__all__ = [
    "PolarizationState",
    "polarization_vector",
    "build_precoder",
    "effective_channel",
    "radiated_power",
    "default_grid",
    "grid_vectors",
    "generate_unpolarized_channel",
    "PolarizationFrontEnd",
    "VERTICAL",
    "HORIZONTAL",
]


@dataclass(frozen=True)
class PolarizationState:
    theta: float
    psi: float
    gamma: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidParameterError(f"reconfiguration efficiency must be in [0, 1], got {self.gamma}",
                                        "polarization")


VERTICAL = PolarizationState(np.pi / 2, 0.0)
HORIZONTAL = PolarizationState(0.0, 0.0)


def polarization_vector(state: PolarizationState) -> np.ndarray:
    """``sqrt(gamma) [cos(theta), sin(theta) e^{j psi}]``."""
    if not 0.0 <= state.gamma <= 1.0:
        raise InvalidParameterError("gamma outside [0, 1]", "polarization")
    g = np.sqrt(state.gamma)
    return g * np.array([np.cos(state.theta), np.sin(state.theta) * np.exp(1j * state.psi)])


def build_precoder(states: Sequence[PolarizationState]) -> np.ndarray:
    """Block-diagonal ``2N x N`` matrix of polarization vectors."""
    states = list(states)
    if not states:
        raise DimensionError("at least one polarization state is required", "polarization")
    return sla.block_diag(*[polarization_vector(s)[:, None] for s in states])


def effective_channel(H_up, W_ra, F_ra) -> np.ndarray:
    """``W_ra^H H_up F_ra``."""
    H_up = np.atleast_2d(np.asarray(H_up, dtype=complex))
    W = np.atleast_2d(np.asarray(W_ra, dtype=complex))
    F = np.atleast_2d(np.asarray(F_ra, dtype=complex))
    if W.shape[0] != H_up.shape[0] or H_up.shape[1] != F.shape[0]:
        raise DimensionError(f"cannot form W^H H F with W {W.shape}, H {H_up.shape}, F {F.shape}",
                             "polarization")
    return W.conj().T @ H_up @ F


def radiated_power(states, F_ana, F_dig, mode: str = "per-antenna") -> float:
    """Transmit power with reconfiguration efficiency.

    ``per-antenna``: ``Tr(F_dig^H F_ana^H diag(gamma) F_ana F_dig)``;
    ``uniform``: ``gamma Tr(F_dig^H F_ana^H F_ana F_dig)`` with the common
    efficiency of the first state.
    """
    gam = np.array([s.gamma for s in states], dtype=float)
    if np.any(gam < 0) or np.any(gam > 1):
        raise InvalidParameterError("gamma outside [0, 1]", "polarization")
    F = np.asarray(F_ana, dtype=complex) @ np.asarray(F_dig, dtype=complex)
    if F.shape[0] != gam.size:
        raise DimensionError(f"precoder drives {F.shape[0]} antennas, {gam.size} states given", "polarization")
    rows = np.sum(np.abs(F) ** 2, axis=1)
    if mode == "per-antenna":
        return float(np.sum(gam * rows))
    if mode == "uniform":
        return float(gam[0] * np.sum(rows))
    raise InvalidParameterError(f"unknown power mode {mode!r}", "polarization")


def default_grid(n_theta: int = 32, n_psi: int = 32):
    """Uniform (theta, psi) grid over [0, pi) x [-pi, pi).

    Angles theta and theta + pi give the same state up to a global sign, so
    half a turn suffices.
    """
    th = np.pi * np.arange(n_theta) / n_theta
    ps = -np.pi + 2 * np.pi * np.arange(n_psi) / n_psi
    T, P = np.meshgrid(th, ps, indexing="ij")
    return T.ravel(), P.ravel()


def grid_vectors(theta, psi, gamma: float = 1.0) -> np.ndarray:
    """Polarization vectors for arrays of angles, shape ``(G, 2)``."""
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    return np.sqrt(gamma) * np.stack([np.cos(theta), np.sin(theta) * np.exp(1j * psi)], axis=-1)


def _pol_matrix(rng, xpd_db: float) -> np.ndarray:
    k = 10 ** (-xpd_db / 20)
    ph = np.exp(2j * np.pi * rng.random(4))
    return np.array([[ph[0], k * ph[1]], [k * ph[2], ph[3]]])


def generate_unpolarized_channel(
    rng: np.random.Generator,
    tx: ArrayDescriptor,
    rx: ArrayDescriptor,
    num_paths: int = 6,
    num_subcarriers: int = 16,
    carrier_freq: float = 28e9,
    bandwidth: float = 400e6,
    xpd_db: float = 6.0,
    rotation_spread: float = np.pi,
) -> ChannelTensor:
    """Geometric polarized multipath channel with 2x2 (H, V) blocks.

    Each path carries a random depolarization matrix with cross-polar
    discrimination ``xpd_db``; antennas are additionally rotated by a random
    angle per array element (uniform within ``rotation_spread``), which
    mimics misaligned handsets. Returns ``(K, 2 N_R, 2 N_T)``.
    """
    K = num_subcarriers
    f = subcarrier_frequencies(carrier_freq, bandwidth, K)
    NT, NR = tx.num_elements, rx.num_elements

    def rot(a):
        c, s = np.cos(a), np.sin(a)
        return np.array([[c, -s], [s, c]])

    Rt = [rot(a) for a in rng.uniform(-rotation_spread / 2, rotation_spread / 2, NT)]
    Rr = [rot(a) for a in rng.uniform(-rotation_spread / 2, rotation_spread / 2, NR)]
    H = np.zeros((K, 2 * NR, 2 * NT), complex)
    max_delay = K / (4 * bandwidth)
    for _ in range(num_paths):
        g = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2 * num_paths)
        tau = rng.uniform(0, max_delay)
        a_t = steering_vector(tx, rng.uniform(-np.pi / 3, np.pi / 3), rng.uniform(-np.pi / 12, np.pi / 12))
        a_r = steering_vector(rx, rng.uniform(-np.pi / 3, np.pi / 3), rng.uniform(-np.pi / 12, np.pi / 12))
        Pm = _pol_matrix(rng, xpd_db)
        blocks = np.zeros((2 * NR, 2 * NT), complex)
        for r in range(NR):
            for t in range(NT):
                blocks[2 * r:2 * r + 2, 2 * t:2 * t + 2] = a_r[r] * np.conj(a_t[t]) * (Rr[r].T @ Pm @ Rt[t])
        H += g * np.exp(-2j * np.pi * f * tau)[:, None, None] * blocks[None]
    return ChannelTensor(H, f)


class PolarizationFrontEnd(FrontEnd):
    """Polarization-reconfigurable transmitter with a fixed receive combiner.

    Parameters
    ----------
    channel : ChannelTensor
        Unpolarized channel ``(K, 2 N_R, 2 N_T)``.
    rx_states : sequence of PolarizationState
        Receive polarizations (``W_ra``).
    tx_states : sequence of PolarizationState
        Transmit polarizations (``F_ra``).
    power_mode : str
        ``per-antenna`` or ``uniform``.
    grid : tuple of arrays, optional
        (theta, psi) candidates for the coordinate search.
    """

    def __init__(self, channel: ChannelTensor, rx_states, tx_states, power_mode="per-antenna", grid=None):
        self.channel = channel
        self.rx_states = tuple(rx_states)
        self.tx_states = tuple(tx_states)
        self.power_mode = power_mode
        self.grid = default_grid() if grid is None else grid
        if channel.shape != (2 * len(self.rx_states), 2 * len(self.tx_states)):
            raise DimensionError("channel must be 2N_R x 2N_T", "polarization")
        self._W = build_precoder(self.rx_states)
        self._F = build_precoder(self.tx_states)

    @property
    def num_subcarriers(self):
        return self.channel.num_subcarriers

    def precoder(self, k):
        return self._F

    def combiner(self, k):
        return self._W

    def effective_channel(self, k):
        return effective_channel(self.channel[k], self._W, self._F)

    def radiated_power(self, k, F_ana, F_dig):
        return radiated_power(self.tx_states, F_ana, F_dig, self.power_mode)

    def power_weight(self, k):
        g = np.array([s.gamma for s in self.tx_states])
        if self.power_mode == "uniform":
            g = np.full_like(g, g[0])
        return np.diag(g).astype(complex)

    def is_feasible(self):
        return all(0 <= s.gamma <= 1 for s in self.tx_states)

    def parameter_grid(self):
        idx = np.arange(self.grid[0].size)
        return [idx] * len(self.tx_states)

    def parameters(self):
        th, ps = self.grid
        out = []
        for s in self.tx_states:
            d = np.abs(np.exp(1j * th) - np.exp(1j * s.theta)) + np.abs(np.exp(1j * ps) - np.exp(1j * s.psi))
            out.append(int(np.argmin(d)))
        return np.array(out)

    def with_parameters(self, values):
        th, ps = self.grid
        states = [PolarizationState(float(th[int(i)]), float(ps[int(i)]), s.gamma)
                  for i, s in zip(values, self.tx_states)]
        return PolarizationFrontEnd(self.channel, self.rx_states, states, self.power_mode, self.grid)
