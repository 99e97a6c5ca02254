"""Pinching antenna systems (dielectric waveguides with movable couplers).

Pinch ``m`` on a guide extracts the fraction ``delta_m`` of the field amplitude
that reaches it, so ``alpha_m = delta_m prod_{i<m} sqrt(1 - delta_i^2)``, and
radiates with phase ``e^{-j beta_g x_m}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from . import kernels
from .core import ChannelTensor, FrontEnd
from .exceptions import DimensionError, InvalidGeometryError, InvalidParameterError

__all__ = [
    "WaveguideLayout",
    "amplitudes",
    "pinch_weights",
    "guide_efficiency",
    "precoder",
    "radiated_power",
    "equal_power_deltas",
    "equal_power_feasible",
    "proportional_deltas",
    "peak_delta",
    "PassFrontEnd",
]

log = logging.getLogger(__name__)

DELTA_CLAMP = 1.0 - 1e-12


def _check_deltas(deltas) -> np.ndarray:
    d = np.asarray(deltas, dtype=float)
    if d.size == 0:
        raise InvalidParameterError("at least one pinch is required", "pass")
    if np.any(~(d > 0)) or np.any(~(d < 1)):
        raise InvalidParameterError("coupling coefficients must lie in the open interval (0, 1)", "pass")
    return d


@dataclass(frozen=True)
class WaveguideLayout:
    """Pinch positions and coupling coefficients for ``P`` waveguides.

    Attributes
    ----------
    positions : tuple of ndarray
        Increasing pinch positions along each guide (m).
    deltas : tuple of ndarray
        Coupling coefficients in (0, 1), same shapes as ``positions``.
    beta_g : float
        Guided propagation constant (rad/m).
    """

    positions: tuple
    deltas: tuple
    beta_g: float

    def __post_init__(self):
        if len(self.positions) != len(self.deltas) or not self.positions:
            raise DimensionError("one position and one delta vector per guide", "pass")
        pos, dl = [], []
        for x, d in zip(self.positions, self.deltas):
            x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
            d = _check_deltas(np.atleast_1d(d)).copy()
            if x.shape != d.shape:
                raise DimensionError("positions and deltas must match per guide", "pass")
            if np.any(np.diff(x) <= 0):
                raise InvalidGeometryError("pinch positions must be strictly increasing", "pass")
            x.setflags(write=False)
            d.setflags(write=False)
            pos.append(x)
            dl.append(d)
        object.__setattr__(self, "positions", tuple(pos))
        object.__setattr__(self, "deltas", tuple(dl))

    @property
    def num_guides(self) -> int:
        return len(self.positions)

    @property
    def num_pinches(self) -> int:
        return sum(x.size for x in self.positions)

    def with_positions(self, positions) -> "WaveguideLayout":
        return WaveguideLayout(tuple(positions), self.deltas, self.beta_g)


def amplitudes(deltas) -> np.ndarray:
    """Sequential coupling amplitudes; accepts ``(M,)`` or batched ``(B, M)``."""
    d = _check_deltas(deltas)
    if d.ndim == 1:
        return kernels.pinch_amplitudes(d[None, :])[0]
    return kernels.pinch_amplitudes(d)


def guide_efficiency(deltas) -> float:
    """Fraction of input power radiated, ``1 - prod(1 - delta_m^2)``."""
    d = _check_deltas(deltas)
    return float(1.0 - np.prod(1.0 - d * d))


def pinch_weights(layout: WaveguideLayout, p: int) -> np.ndarray:
    """``[f_p]_m = alpha_m e^{-j beta_g x_{p,m}}``."""
    if not 0 <= p < layout.num_guides:
        raise InvalidParameterError(f"guide index {p} out of range", "pass")
    return amplitudes(layout.deltas[p]) * np.exp(-1j * layout.beta_g * layout.positions[p])


def precoder(layout: WaveguideLayout) -> np.ndarray:
    """Block-diagonal ``F_ra`` of shape ``(num_pinches, P)``."""
    return sla.block_diag(*[pinch_weights(layout, p)[:, None] for p in range(layout.num_guides)])


def radiated_power(layout: WaveguideLayout, F_ana, F_dig) -> float:
    """``Tr(F_dig^H F_ana^H diag(eta_p) F_ana F_dig)``; independent of positions."""
    eta = np.array([guide_efficiency(d) for d in layout.deltas])
    F = np.asarray(F_ana, dtype=complex) @ np.asarray(F_dig, dtype=complex)
    if F.shape[0] != eta.size:
        raise DimensionError(f"precoder drives {F.shape[0]} guides, layout has {eta.size}", "pass")
    return float(np.sum(eta * np.sum(np.abs(F) ** 2, axis=1)))


def equal_power_feasible(M: int, alpha: float) -> bool:
    """Whether ``M`` pinches can each radiate amplitude ``alpha`` (``M alpha^2 <= 1``)."""
    return M >= 1 and alpha > 0 and M * alpha ** 2 <= 1.0 + 1e-15


def equal_power_deltas(M: int, alpha: float, return_residual: bool = False):
    """Couplings giving every pinch the same amplitude ``alpha``.

    ``delta_m = alpha / sqrt(1 - (m-1) alpha^2)``. When ``M alpha^2 = 1`` the
    last coupling would be 1 and is clamped to ``1 - 1e-12``; the clamp
    residual ``1 - delta_M`` is logged and optionally returned.
    """
    if M < 1:
        raise InvalidParameterError("M must be >= 1", "pass")
    if not 0 < alpha < 1:
        raise InvalidParameterError("alpha must lie in (0, 1)", "pass")
    if not equal_power_feasible(M, alpha):
        raise InvalidParameterError(f"infeasible equal-power design: M alpha^2 = {M * alpha ** 2:.6g} > 1", "pass")
    m = np.arange(M)
    rem = np.maximum(1.0 - m * alpha ** 2, 0.0)
    d = alpha / np.sqrt(rem)
    residual = 0.0
    if d[-1] >= 1.0:
        residual = float(d[-1] - DELTA_CLAMP)
        d[-1] = DELTA_CLAMP
        log.info("equal-power design clamped last coupling (residual %.3e)", residual)
    return (d, residual) if return_residual else d


def proportional_deltas(M: int, delta: float) -> np.ndarray:
    """Uniform coupling ``delta`` on every pinch."""
    _check_deltas([delta])
    return np.full(M, float(delta))


def peak_delta(m: int) -> float:
    """Uniform coupling maximizing the amplitude of pinch ``m`` (1-based): ``1/sqrt(m)``."""
    if m < 1:
        raise InvalidParameterError("pinch index is 1-based", "pass")
    return 1.0 / np.sqrt(m)


class PassFrontEnd(FrontEnd):
    """``H_eff,k = H_k F_ra`` for a pinching-antenna transmitter.

    Parameters
    ----------
    channel : ChannelTensor
        ``(K, N_R, num_pinches)``.
    layout : WaveguideLayout
    levels : int
        Position offsets per pinch tried by the coordinate search, spread over
        one guided wavelength around the nominal position.
    """

    def __init__(self, channel: ChannelTensor, layout: WaveguideLayout, levels: int = 16, nominal=None):
        self.channel = channel
        self.layout = layout
        self.levels = int(levels)
        self.nominal = tuple(layout.positions) if nominal is None else tuple(nominal)
        if channel.shape[1] != layout.num_pinches:
            raise DimensionError("channel columns must equal the number of pinches", "pass")
        self._F = precoder(layout)

    @property
    def num_subcarriers(self):
        return self.channel.num_subcarriers

    def precoder(self, k):
        return self._F

    def effective_channel(self, k):
        return self.channel[k] @ self._F

    def radiated_power(self, k, F_ana, F_dig):
        return radiated_power(self.layout, F_ana, F_dig)

    def power_weight(self, k):
        return np.diag([guide_efficiency(d) for d in self.layout.deltas]).astype(complex)

    def is_feasible(self):
        return all(np.all(np.diff(x) > 0) for x in self.layout.positions)

    def parameter_grid(self):
        lam_g = 2 * np.pi / self.layout.beta_g if self.layout.beta_g else 1.0
        off = lam_g * (np.arange(self.levels) / self.levels - 0.5)
        return [x0 + off for x in self.nominal for x0 in x]

    def parameters(self):
        return np.concatenate(self.layout.positions)

    def with_parameters(self, values):
        values = np.asarray(values, dtype=float)
        out, i = [], 0
        for x in self.layout.positions:
            out.append(values[i:i + x.size])
            i += x.size
        return PassFrontEnd(self.channel, self.layout.with_positions(out), self.levels, self.nominal)
