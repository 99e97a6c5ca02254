"""Dynamic metasurface antennas (waveguide-fed Lorentzian slot arrays).

Element ``m`` of a waveguide radiates ``-(j/2)(1 + e^{j z_m})`` times the
field that survives the forward scattering of the elements before it. Each
waveguide (subarray) hangs off one phase shifter, and ``N_ps`` phase
shifters share an RF chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import kernels
from .core import ChannelTensor, FrontEnd, as_matrix_stack
from .exceptions import DimensionError, InvalidParameterError, ModelError

__all__ = [
    "DmaGeometry",
    "DmaConfig",
    "element_factor",
    "dma_weights",
    "phase_advance",
    "residual_transmission",
    "radiated_power",
    "calibrate_coupling",
    "analog_blocks",
    "subarray_array_factors",
    "realized_gain",
    "DmaFrontEnd",
]


@dataclass(frozen=True)
class DmaGeometry:
    """DMA layout.

    Attributes
    ----------
    N_sub : int
        Elements per waveguide.
    N_ps : int
        Waveguides (phase shifters) per RF chain.
    N_rf : int
        RF chains.
    x : ndarray
        Element positions along the waveguide, length ``N_sub`` (shared by all
        waveguides) or ``N_sub * N_ps * N_rf``.
    beta_g : float
        Guided propagation constant (rad/m).
    nu : float
        Coupling strength in (0, 1].
    y_spacing : float
        Waveguide pitch, used for planar array factors.
    """

    N_sub: int
    N_ps: int
    N_rf: int
    x: np.ndarray
    beta_g: float
    nu: float
    y_spacing: float = 0.0

    def __post_init__(self):
        if self.N_sub < 1 or self.N_ps < 1 or self.N_rf < 1:
            raise InvalidParameterError("DMA counts must be positive", "dma")
        if not 0 < self.nu <= 1:
            raise InvalidParameterError(f"coupling strength must be in (0, 1], got {self.nu}", "dma")
        x = np.asarray(self.x, dtype=float).ravel()
        if x.size == self.N_sub:
            x = np.tile(x, self.N_ps * self.N_rf)
        if x.size != self.num_elements:
            raise DimensionError(f"expected {self.N_sub} or {self.num_elements} positions", "dma")
        xs = x.reshape(self.num_subarrays, self.N_sub)
        if self.N_sub > 1 and np.any(np.diff(xs, axis=1) <= 0):
            raise InvalidParameterError("positions must increase along each waveguide", "dma")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def num_subarrays(self) -> int:
        return self.N_ps * self.N_rf

    @property
    def num_elements(self) -> int:
        return self.N_sub * self.num_subarrays

    @classmethod
    def uniform(cls, N_sub, N_ps, N_rf, wavelength, beta_g=None, nu=None, spacing=None):
        """Half-wavelength element and waveguide pitch; ``nu`` calibrated when omitted."""
        d = wavelength / 2 if spacing is None else spacing
        bg = 2 * np.pi / wavelength if beta_g is None else beta_g
        nu = calibrate_coupling(N_sub) if nu is None else nu
        return cls(N_sub, N_ps, N_rf, d * np.arange(N_sub), bg, nu, d)


@dataclass(frozen=True)
class DmaConfig:
    """Tuning phases ``z_m`` in [-pi, pi), one per element."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).ravel()
        z = np.mod(z + np.pi, 2 * np.pi) - np.pi
        z.setflags(write=False)
        object.__setattr__(self, "z", z)


def element_factor(z) -> np.ndarray:
    """Lorentzian radiating factor ``-(j/2)(1 + e^{jz})`` (circle |w + j/2| = 1/2)."""
    z = np.asarray(z, dtype=float)
    e = 1.0 + np.exp(1j * z)
    return -0.5j * np.where(np.abs(z) == np.pi, 0.0, e)


def _z(geom: DmaGeometry, config) -> np.ndarray:
    z = config.z if isinstance(config, DmaConfig) else np.asarray(config, dtype=float).ravel()
    if z.size != geom.num_elements:
        raise DimensionError(f"config has {z.size} phases, geometry has {geom.num_elements} elements", "dma")
    return z


def _chain(geom, z):
    w, s = kernels.lorentzian_chain(z[None, :], geom.nu, geom.N_sub)
    return w[0], s[0]


def dma_weights(geom: DmaGeometry, config) -> np.ndarray:
    """Block-diagonal ``F_ra`` of shape ``(N_elements, N_subarrays)``."""
    w, _ = _chain(geom, _z(geom, config))
    blocks = [w[p * geom.N_sub:(p + 1) * geom.N_sub, None] for p in range(geom.num_subarrays)]
    return sla.block_diag(*blocks)


def phase_advance(geom: DmaGeometry, N_R: int = 1) -> np.ndarray:
    """``Q = 1_{N_R} q^T`` with ``q_m = exp(-j beta_g x_m)``."""
    q = np.exp(-1j * geom.beta_g * geom.x)
    return np.ones((N_R, 1)) * q[None, :]


def residual_transmission(geom: DmaGeometry, config, p: int) -> complex:
    """Field surviving past the last element of subarray ``p``."""
    if not 0 <= p < geom.num_subarrays:
        raise InvalidParameterError(f"subarray index {p} out of range", "dma")
    _, s = _chain(geom, _z(geom, config))
    return complex(s[p])


def radiated_power(geom: DmaGeometry, config, F_ana, F_dig, tol: float = 1e-12) -> float:
    """``sum_p P_in (1 - |S12_p|^2)`` with ``P_in = ||F_ana F_dig||_F^2``."""
    _, s = _chain(geom, _z(geom, config))
    F = np.asarray(F_ana, dtype=complex) @ np.asarray(F_dig, dtype=complex)
    if F.shape[0] != geom.num_subarrays:
        raise DimensionError(f"analog precoder must have {geom.num_subarrays} rows", "dma")
    p_in = float(np.sum(np.abs(F) ** 2))
    P = p_in * float(np.sum(1.0 - np.abs(s) ** 2))
    if P < -tol:
        raise ModelError(f"negative radiated power {P:.3e}", "dma")
    return max(P, 0.0)


def calibrate_coupling(N_sub: int, target_residual: float = 0.1, floor: float = 0.2) -> float:
    """Coupling strength leaving ``target_residual`` power with all elements at z=0.

    Solves ``(1 - nu)^(2 N_sub) = target`` and clamps from below at ``floor``.
    """
    if not 0 < target_residual <= 1:
        raise InvalidParameterError("target residual must lie in (0, 1]", "dma")
    if N_sub < 1:
        raise InvalidParameterError("N_sub must be >= 1", "dma")
    return float(max(floor, 1.0 - target_residual ** (1.0 / (2 * N_sub))))


def analog_blocks(phases, N_ps: int, N_rf: int) -> np.ndarray:
    """Block-diagonal analog precoder with unit-modulus entries, ``(N_ps N_rf, N_rf)``."""
    ph = np.asarray(phases, dtype=float).reshape(N_rf, N_ps)
    return sla.block_diag(*[np.exp(1j * ph[r])[:, None] for r in range(N_rf)])


def _element_xy(geom: DmaGeometry):
    y = np.repeat(np.arange(geom.num_subarrays) * geom.y_spacing, geom.N_sub)
    return geom.x, y


def subarray_array_factors(geom: DmaGeometry, z_batch, k0: float, u=(0.0, 0.0)) -> np.ndarray:
    """Per-waveguide array factors toward direction cosines ``u = (ux, uy)``.

    ``z_batch`` has shape ``(B, N_elements)``; returns ``(B, N_subarrays)``.
    Includes the waveguide phase advance.
    """
    z_batch = np.atleast_2d(np.asarray(z_batch, dtype=float))
    w, _ = kernels.lorentzian_chain(z_batch, geom.nu, geom.N_sub)
    x, y = _element_xy(geom)
    ph = np.exp(-1j * geom.beta_g * x + 1j * k0 * (u[0] * x + u[1] * y))
    return (w * ph[None, :]).reshape(z_batch.shape[0], geom.num_subarrays, geom.N_sub).sum(axis=-1)


def realized_gain(geom: DmaGeometry, z_batch, k0: float, u=(0.0, 0.0), element_gain: float = 1.0):
    """Array-factor realized gain toward ``u`` with co-phased waveguides.

    Every waveguide receives unit input power and its phase shifter aligns its
    array factor, so ``G = g_e (sum_p |AF_p|)^2 / N_subarrays``.
    """
    af = subarray_array_factors(geom, z_batch, k0, u)
    g = element_gain * np.sum(np.abs(af), axis=-1) ** 2 / geom.num_subarrays
    return g if np.ndim(z_batch) > 1 else float(g[0])


class DmaFrontEnd(FrontEnd):
    """``H_eff,k = (H_k o Q) F_ra`` for a DMA transmitter."""

    def __init__(self, channel: ChannelTensor, geom: DmaGeometry, config, levels: int = 16):
        self.channel = channel
        self.geom = geom
        self.config = config if isinstance(config, DmaConfig) else DmaConfig(config)
        self.levels = int(levels)
        if channel.shape[1] != geom.num_elements:
            raise DimensionError("channel columns must equal the number of DMA elements", "dma")
        self._F = dma_weights(geom, self.config)
        self._Q = phase_advance(geom, channel.shape[0])
        _, self._s = _chain(geom, self.config.z)

    @property
    def num_subcarriers(self):
        return self.channel.num_subcarriers

    def precoder(self, k):
        return self._F

    def effective_channel(self, k):
        return (self.channel[k] * self._Q) @ self._F

    def radiated_power(self, k, F_ana, F_dig):
        return radiated_power(self.geom, self.config, F_ana, F_dig)

    def power_weight(self, k):
        return float(np.sum(1.0 - np.abs(self._s) ** 2)) * np.eye(self.geom.num_subarrays, dtype=complex)

    def is_feasible(self):
        z = self.config.z
        return bool(np.all((z >= -np.pi) & (z < np.pi)))

    def parameter_grid(self):
        g = -np.pi + 2 * np.pi * np.arange(self.levels) / self.levels
        return [g] * self.geom.num_elements

    def parameters(self):
        return np.array(self.config.z)

    def with_parameters(self, values):
        return DmaFrontEnd(self.channel, self.geom, DmaConfig(values), self.levels)
