"""Parasitic arrays: load-tuned undriven elements coupled to active antennas.

Circuit model. Active currents ``i_A = F_ana F_dig x`` induce parasitic
currents ``i_P = -(Z_P + Z_R)^{-1} Z_m i_A``; the receive voltages are
``Z_RA i_A + Z_RP i_P``. Powers follow from the real part of the array
impedance matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .core import ChannelTensor, FrontEnd, as_matrix_stack
from .exceptions import (
    DimensionError,
    InvalidParameterError,
    PassivityError,
    SingularConfigurationError,
)

__all__ = [
    "ImpedanceSet",
    "ParasiticLoads",
    "COND_LIMIT",
    "parasitic_precoder",
    "effective_channel",
    "effective_impedance",
    "radiated_power",
    "scalar_weight_locus",
    "synthesize_impedance_set",
    "ParasiticFrontEnd",
]

COND_LIMIT = 1e12


@dataclass(frozen=True)
class ImpedanceSet:
    """Impedance blocks, each stored as a ``(K, rows, cols)`` stack.

    Z_RA : (N_R, N_A)   receiver <- active
    Z_RP : (N_R, N_P)   receiver <- parasitic
    Z_P  : (N_P, N_P)   parasitic mutual impedances
    Z_A  : (N_A, N_A)   active mutual impedances
    Z_m  : (N_P, N_A)   parasitic <- active
    """

    Z_RA: np.ndarray
    Z_RP: np.ndarray
    Z_P: np.ndarray
    Z_A: np.ndarray
    Z_m: np.ndarray

    def __post_init__(self):
        blocks = {n: as_matrix_stack(getattr(self, n), n) for n in ("Z_RA", "Z_RP", "Z_P", "Z_A", "Z_m")}
        K = max(b.shape[0] for b in blocks.values())
        for n, b in blocks.items():
            if b.shape[0] == 1 and K > 1:
                b = np.broadcast_to(b, (K,) + b.shape[1:])
            if b.shape[0] != K:
                raise DimensionError(f"{n} has {b.shape[0]} subcarriers, expected {K}", "parasitic")
            b = np.array(b)
            b.setflags(write=False)
            object.__setattr__(self, n, b)
        N_R, N_A = self.Z_RA.shape[1:]
        N_P = self.Z_P.shape[1]
        if self.Z_RP.shape[1:] != (N_R, N_P):
            raise DimensionError(f"Z_RP must be {(N_R, N_P)}, got {self.Z_RP.shape[1:]}", "parasitic")
        if self.Z_P.shape[1:] != (N_P, N_P):
            raise DimensionError("Z_P must be square", "parasitic")
        if self.Z_A.shape[1:] != (N_A, N_A):
            raise DimensionError(f"Z_A must be {(N_A, N_A)}", "parasitic")
        if self.Z_m.shape[1:] != (N_P, N_A):
            raise DimensionError(f"Z_m must be {(N_P, N_A)}, got {self.Z_m.shape[1:]}", "parasitic")

    @property
    def num_subcarriers(self) -> int:
        return self.Z_RA.shape[0]

    @property
    def dims(self):
        """(N_R, N_A, N_P)."""
        return self.Z_RA.shape[1], self.Z_RA.shape[2], self.Z_P.shape[1]


@dataclass(frozen=True)
class ParasiticLoads:
    """Diagonal load impedances ``Z_R`` (length N_P, complex Ohms)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=complex)).ravel()
        if np.any(v.real < 0):
            raise InvalidParameterError("parasitic loads must have Re >= 0 (passive)", "parasitic")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_reactance(cls, reactance, resistance: float = 0.0):
        return cls(resistance + 1j * np.asarray(reactance, dtype=float))


def parasitic_precoder(Z_P, Z_R) -> np.ndarray:
    """``F_ra = (Z_P + Z_R)^{-1}`` by LU with partial pivoting.

    ``Z_R`` may be a vector of load values, a diagonal matrix or a
    :class:`ParasiticLoads`.
    """
    Z_P = np.atleast_2d(np.asarray(Z_P, dtype=complex))
    if isinstance(Z_R, ParasiticLoads):
        Z_R = Z_R.values
    Z_R = np.asarray(Z_R, dtype=complex)
    if Z_R.ndim <= 1:
        Z_R = np.diag(np.atleast_1d(Z_R))
    if Z_R.shape != Z_P.shape:
        raise DimensionError(f"load matrix {Z_R.shape} does not match Z_P {Z_P.shape}", "parasitic")
    A = Z_P + Z_R
    if A.size == 0:
        return np.zeros_like(A)
    c = np.linalg.cond(A)
    if not np.isfinite(c) or c > COND_LIMIT:
        raise SingularConfigurationError(f"Z_P + Z_R is singular (cond={c:.3e})", "parasitic")
    lu = sla.lu_factor(A)
    return sla.lu_solve(lu, np.eye(A.shape[0], dtype=complex))


def effective_channel(Z_RA, Z_RP, F_ra, Z_m) -> np.ndarray:
    """``H_eff = Z_RA - Z_RP F_ra Z_m`` for one subcarrier."""
    Z_RA = np.atleast_2d(np.asarray(Z_RA, dtype=complex))
    Z_RP = np.atleast_2d(np.asarray(Z_RP, dtype=complex))
    F_ra = np.atleast_2d(np.asarray(F_ra, dtype=complex))
    Z_m = np.atleast_2d(np.asarray(Z_m, dtype=complex))
    if Z_RP.shape[1] == 0:
        return Z_RA.copy()
    if Z_RP.shape[1] != F_ra.shape[0] or F_ra.shape[1] != Z_m.shape[0] or Z_m.shape[1] != Z_RA.shape[1] \
            or Z_RP.shape[0] != Z_RA.shape[0]:
        raise DimensionError("impedance blocks are not conformable", "parasitic")
    return Z_RA - Z_RP @ F_ra @ Z_m


def effective_impedance(Z_A, Z_m, Z_P, F_ra) -> np.ndarray:
    """Effective impedance seen by the active ports.

    ``Re{Z_A} - Re{Z_m^T} F Z_m - Z_m^H F^H Re{Z_m} + Z_m^H F^H Re{Z_P} F Z_m``
    """
    Z_A = np.atleast_2d(np.asarray(Z_A, dtype=complex))
    Z_m = np.atleast_2d(np.asarray(Z_m, dtype=complex))
    Z_P = np.atleast_2d(np.asarray(Z_P, dtype=complex))
    F = np.atleast_2d(np.asarray(F_ra, dtype=complex))
    if Z_m.shape[0] == 0:
        return Z_A.real.astype(complex)
    if F.shape != Z_P.shape or Z_m.shape[0] != F.shape[0] or Z_m.shape[1] != Z_A.shape[0]:
        raise DimensionError("impedance blocks are not conformable", "parasitic")
    ZmH = Z_m.conj().T
    FH = F.conj().T
    return (
        Z_A.real
        - Z_m.T.real @ F @ Z_m
        - ZmH @ FH @ Z_m.real
        + ZmH @ FH @ Z_P.real @ F @ Z_m
    )


def radiated_power(Z_A, Z_m, Z_P, F_ra, F_ana, F_dig, tol: float = 1e-9) -> float:
    """Radiated power ``Re Tr(F_dig^H F_ana^H Z_eff F_ana F_dig)`` in Watts."""
    F = np.atleast_2d(np.asarray(F_ana, dtype=complex)) @ np.atleast_2d(np.asarray(F_dig, dtype=complex))
    Z = effective_impedance(Z_A, Z_m, Z_P, F_ra)
    if Z.shape[1] != F.shape[0]:
        raise DimensionError(f"precoder drives {F.shape[0]} ports, Z_eff has {Z.shape[1]}", "parasitic")
    Zh = 0.5 * (Z + Z.conj().T)
    p = float(np.real(np.trace(F.conj().T @ Zh @ F)))
    if p < -tol:
        raise PassivityError(f"radiated power {p:.3e} W is negative", "parasitic")
    return p


def scalar_weight_locus(R: float, reactance_sweep) -> np.ndarray:
    """Weights ``1/(R + jX)``; they lie on the circle through the origin of radius ``1/(2R)``."""
    if not R > 0:
        raise InvalidParameterError("R must be > 0", "parasitic")
    X = np.asarray(reactance_sweep, dtype=float)
    return 1.0 / (R + 1j * X)


def synthesize_impedance_set(
    rng: np.random.Generator,
    N_A: int,
    N_P: int,
    N_R: int = 1,
    K: int = 1,
    resistance_scale: float = 50.0,
    reactance_scale: float = 50.0,
    channel_scale: float = 1.0,
) -> ImpedanceSet:
    """Random passive impedance set.

    The full (N_A+N_P) transmit impedance is ``jX + G G^H`` with ``X`` real
    symmetric, so its real part is positive semidefinite. Receive-side blocks
    are i.i.d. complex Gaussian with standard deviation ``channel_scale``.
    """
    N = N_A + N_P
    Z_A = np.empty((K, N_A, N_A), complex)
    Z_m = np.empty((K, N_P, N_A), complex)
    Z_P = np.empty((K, N_P, N_P), complex)
    for k in range(K):
        G = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2 * N)
        X = rng.standard_normal((N, N))
        X = 0.5 * (X + X.T)
        Z = resistance_scale * (G @ G.conj().T) + 1j * reactance_scale * X
        # diagonal self-resistance keeps every element individually lossy-radiating
        Z += resistance_scale * 0.1 * np.eye(N)
        Z_A[k] = Z[:N_A, :N_A]
        Z_m[k] = Z[N_A:, :N_A]
        Z_P[k] = Z[N_A:, N_A:]
    s = channel_scale / np.sqrt(2)
    Z_RA = s * (rng.standard_normal((K, N_R, N_A)) + 1j * rng.standard_normal((K, N_R, N_A)))
    Z_RP = s * (rng.standard_normal((K, N_R, N_P)) + 1j * rng.standard_normal((K, N_R, N_P)))
    return ImpedanceSet(Z_RA, Z_RP, Z_P, Z_A, Z_m)


class ParasiticFrontEnd(FrontEnd):
    """Parasitic array front end with reactance-tuned loads.

    Parameters
    ----------
    imp : ImpedanceSet
    reactance : array_like
        Load reactances (Ohms), one per parasitic element.
    resistance : float
        Fixed load loss resistance.
    x_range : (float, float)
        Admissible reactance interval.
    grid_points : int
        Candidates per coordinate for the generic coordinate search.
    """

    def __init__(self, imp: ImpedanceSet, reactance, resistance: float = 1.0,
                 x_range=(-200.0, 200.0), grid_points: int = 41):
        self.imp = imp
        self.reactance = np.asarray(reactance, dtype=float).ravel()
        if self.reactance.size != imp.dims[2]:
            raise DimensionError("one reactance per parasitic element expected", "parasitic")
        self.resistance = float(resistance)
        self.x_range = (float(x_range[0]), float(x_range[1]))
        self.grid_points = int(grid_points)
        self.loads = ParasiticLoads.from_reactance(self.reactance, self.resistance)
        self._F = [parasitic_precoder(imp.Z_P[k], self.loads) for k in range(imp.num_subcarriers)]

    @property
    def num_subcarriers(self):
        return self.imp.num_subcarriers

    def precoder(self, k):
        return self._F[k]

    def effective_channel(self, k):
        i = self.imp
        return effective_channel(i.Z_RA[k], i.Z_RP[k], self._F[k], i.Z_m[k])

    def effective_impedance(self, k):
        i = self.imp
        return effective_impedance(i.Z_A[k], i.Z_m[k], i.Z_P[k], self._F[k])

    def radiated_power(self, k, F_ana, F_dig):
        i = self.imp
        return radiated_power(i.Z_A[k], i.Z_m[k], i.Z_P[k], self._F[k], F_ana, F_dig)

    def is_feasible(self):
        lo, hi = self.x_range
        return bool(self.resistance >= 0 and np.all((self.reactance >= lo) & (self.reactance <= hi)))

    def parameter_grid(self):
        g = np.linspace(self.x_range[0], self.x_range[1], self.grid_points)
        return [g] * self.reactance.size

    def parameters(self):
        return self.reactance.copy()

    def with_parameters(self, values):
        return ParasiticFrontEnd(self.imp, values, self.resistance, self.x_range, self.grid_points)

    def power_weight(self, k):
        """Hermitian PSD matrix ``W`` with ``P = Tr(F^H W F)``."""
        Z = self.effective_impedance(k)
        return 0.5 * (Z + Z.conj().T)
