"""Non-radiating wires: periodically fed thin-wire connected arrays.

The port impedance follows from a spatial-harmonic (Floquet) sum
``Phi(alpha)`` and a feed-phasing integral over one period of ``alpha``.
The verbatim harmonic sum diverges logarithmically for an ideal
(zero-width) feed gap, so every harmonic is weighted by the gap spectrum
``sinc^2(alpha_l g / 2)``; ``gap=0`` recovers the verbatim series.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from . import kernels
from .core import ChannelTensor, FrontEnd
from .exceptions import (
    ConvergenceError,
    DimensionError,
    InvalidGeometryError,
    InvalidParameterError,
    PassivityError,
    SingularConfigurationError,
)

__all__ = [
    "WireGeometry",
    "phi_kernel",
    "phi_kernel_converged",
    "port_impedances",
    "port_impedance",
    "impedance_matrix",
    "wire_precoder",
    "radiated_power",
    "port_loads",
    "excitation_vector",
    "snr_field_map",
    "write_field_map",
    "count_nulls",
    "null_location",
    "port_positions",
    "observation_channel",
    "WireFrontEnd",
]

COND_LIMIT = 1e12
Z0_FREE_SPACE = 376.730313668


@dataclass(frozen=True)
class WireGeometry:
    """Periodically fed wire.

    Attributes
    ----------
    radius : float
        Wire radius ``a`` (m).
    spacing : float
        Port spacing ``Delta`` (m).
    wavelength : float
        Free-space wavelength (m); ``k0 = 2 pi / wavelength``.
    num_ports : int
    excited : tuple of int
        Driven ports; the rest are terminated by ``z_load``.
    z_load : complex or sequence
        Load impedance(s) at the non-excited ports (Ohms).
    Z0 : float
        Intrinsic impedance (Ohms).
    gap : float, optional
        Feed-gap width used to regularize the harmonic sum (default: radius).
    source_impedance : complex
        Internal impedance of the generators at excited ports.
    """

    radius: float
    spacing: float
    wavelength: float
    num_ports: int = 1
    excited: tuple = (0,)
    z_load: object = 377.0
    Z0: float = Z0_FREE_SPACE
    gap: Optional[float] = None
    source_impedance: complex = 0.0

    def __post_init__(self):
        if not (self.radius > 0 and self.spacing > 0 and self.wavelength > 0):
            raise InvalidGeometryError("radius, spacing and wavelength must be > 0", "wire")
        if self.radius >= self.spacing / 2:
            raise InvalidGeometryError("thin-wire model needs radius < spacing / 2", "wire")
        if self.num_ports < 1:
            raise InvalidGeometryError("at least one port is required", "wire")
        exc = tuple(sorted(int(i) for i in self.excited))
        if len(set(exc)) != len(exc) or any(i < 0 or i >= self.num_ports for i in exc):
            raise InvalidParameterError("excited ports must be distinct and in range", "wire")
        object.__setattr__(self, "excited", exc)
        if self.gap is None:
            object.__setattr__(self, "gap", float(self.radius))
        if self.gap < 0:
            raise InvalidGeometryError("gap must be >= 0", "wire")

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def loaded(self) -> tuple:
        return tuple(i for i in range(self.num_ports) if i not in self.excited)

    def replace(self, **kw) -> "WireGeometry":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return WireGeometry(**d)


def _check_grazing(alpha, geom: WireGeometry, L: int):
    per = 2 * np.pi / geom.spacing
    ell = np.arange(-L + 1, L + 1)
    al = np.asarray(alpha, dtype=float).ravel()[:, None] - per * ell[None, :]
    if np.any(al * al == geom.k0 ** 2):
        raise SingularConfigurationError("grazing harmonic (beta_l = 0) in the kernel sum", "wire")


def phi_kernel(alpha, geom: WireGeometry, L_trunc: int) -> np.ndarray:
    """Harmonic sum over ``l = -L+1 .. L`` (``2L`` terms, reflection-symmetric grid)."""
    if L_trunc < 1:
        raise InvalidParameterError("L_trunc must be >= 1", "wire")
    _check_grazing(alpha, geom, L_trunc)
    out = kernels.phi_sum(np.atleast_1d(alpha), geom.k0, geom.radius, geom.spacing, geom.gap, int(L_trunc))
    return out if np.ndim(alpha) else complex(out[0])


def phi_kernel_converged(alpha, geom: WireGeometry, tol: float = 1e-6, L0: int = 16, L_max: int = 1 << 16):
    """Double ``L`` until ``max |Phi_L - Phi_2L| / |Phi_2L| < tol``.

    Returns ``(Phi_2L, L, rel_change)``.
    """
    if geom.gap == 0:
        raise ConvergenceError("the zero-gap harmonic sum diverges; use gap > 0", "wire")
    L = L0
    prev = np.atleast_1d(phi_kernel(np.atleast_1d(alpha), geom, L))
    while True:
        cur = np.atleast_1d(phi_kernel(np.atleast_1d(alpha), geom, 2 * L))
        rel = float(np.max(np.abs(cur - prev) / np.abs(cur)))
        if rel < tol:
            return (cur if np.ndim(alpha) else complex(cur[0])), L, rel
        if 2 * L >= L_max:
            raise ConvergenceError(f"kernel not converged at L={2 * L} (rel change {rel:.2e})", "wire")
        L *= 2
        prev = cur


def _segments(geom: WireGeometry):
    # integrate over [0, pi/Delta] and split at grazing points, where 1/Phi -> 0
    per = 2 * np.pi / geom.spacing
    half = per / 2
    cuts = sorted({x for x in (geom.k0 % per, (-geom.k0) % per) if 0 < x < half})
    br = [0.0] + cuts + [half]
    return list(zip(br[:-1], br[1:]))


def _quad_nodes(segs, n):
    # t - sin(2 pi t)/(2 pi) grading clusters nodes at segment ends
    t = np.arange(1, n) / n
    w = (1 - np.cos(2 * np.pi * t)) / n
    al, wt = [], []
    for A, B in segs:
        al.append(A + (B - A) * (t - np.sin(2 * np.pi * t) / (2 * np.pi)))
        wt.append((B - A) * w)
    return np.concatenate(al), np.concatenate(wt)


@functools.lru_cache(maxsize=64)
def _port_impedances_unit(radius, spacing, wavelength, gap, m_max, tol, n0, n_max):
    geom = WireGeometry(radius, spacing, wavelength, gap=gap)
    segs = _segments(geom)
    # truncation order fixed from kernel convergence at probe points
    probe, _ = _quad_nodes(segs, 8)
    _, L, kern_rel = phi_kernel_converged(probe, geom, tol=tol)
    L *= 2
    m = np.arange(m_max + 1)
    pref = spacing ** 2 / (8 * np.pi * geom.k0)

    def z_at(n):
        al, wt = _quad_nodes(segs, n)
        inv = 1.0 / phi_kernel(al, geom, L)
        return 2 * pref * (np.cos(np.outer(m, al) * spacing) @ (wt * inv))

    n = n0
    prev = z_at(n)
    while True:
        n *= 2
        cur = z_at(n)
        rel = float(np.max(np.abs(cur - prev)) / np.max(np.abs(cur)))
        if rel < tol:
            return cur, L, kern_rel, rel, n
        if n >= n_max:
            raise ConvergenceError(f"port-impedance quadrature not converged at {n} nodes (rel {rel:.2e})", "wire")
        prev = cur


def port_impedances(geom: WireGeometry, m_max: Optional[int] = None, tol: float = 1e-6,
                    n0: int = 16, n_max: int = 4096, info: bool = False):
    """Port impedances ``z[m Delta]`` for ``m = 0 .. m_max`` (default ``N - 1``).

    The integrand is even about ``pi/Delta``, so only half the period is
    integrated; nodes are doubled until the relative change is below ``tol``.
    With ``info=True`` also returns a dict with the truncation order and the
    achieved kernel and quadrature self-convergence.
    """
    if m_max is None:
        m_max = geom.num_ports - 1
    if m_max < 0:
        raise InvalidParameterError("m_max must be >= 0", "wire")
    z, L, kr, qr, n = _port_impedances_unit(float(geom.radius), float(geom.spacing), float(geom.wavelength),
                                           float(geom.gap), int(m_max), float(tol), int(n0), int(n_max))
    z = geom.Z0 * z
    if info:
        return z, {"L": L, "kernel_rel_change": kr, "quad_rel_change": qr, "nodes_per_segment": n}
    return z


def port_impedance(m: int, geom: WireGeometry, **kw) -> complex:
    """``z[m Delta]``; symmetric in ``m``."""
    m = abs(int(m))
    return complex(port_impedances(geom, max(m, 0), **kw)[m])


def impedance_matrix(geom: WireGeometry, **kw) -> np.ndarray:
    """Symmetric Toeplitz ``[Z_ra]_{ij} = z[|i-j| Delta]``."""
    z = port_impedances(geom, geom.num_ports - 1, **kw)
    return sla.toeplitz(z, z)


def port_loads(geom: WireGeometry) -> np.ndarray:
    """Per-port termination: ``source_impedance`` at excited ports, ``z_load`` elsewhere."""
    zl = np.broadcast_to(np.asarray(geom.z_load, dtype=complex), (len(geom.loaded),))
    out = np.full(geom.num_ports, complex(geom.source_impedance))
    out[list(geom.loaded)] = zl
    if np.any(out.real < 0):
        raise PassivityError("loads must have non-negative resistance", "wire")
    return out


def wire_precoder(Z_ra, z_load) -> np.ndarray:
    """``(Z_ra + diag(z_load))^{-1}``."""
    Z = np.atleast_2d(np.asarray(Z_ra, dtype=complex))
    zl = np.asarray(z_load, dtype=complex).ravel()
    if Z.shape != (zl.size, zl.size):
        raise DimensionError(f"Z_ra {Z.shape} and {zl.size} loads are not conformable", "wire")
    A = Z + np.diag(zl)
    if np.linalg.cond(A) > COND_LIMIT:
        raise SingularConfigurationError("Z_ra + diag(z_load) is numerically singular", "wire")
    return np.linalg.inv(A)


def radiated_power(Z_ra, F_ana, F_dig, tol: float = 1e-9) -> float:
    """``Tr(F^H Herm(Z_ra^{-1}) F)`` with ``F = F_ana F_dig``."""
    Z = np.atleast_2d(np.asarray(Z_ra, dtype=complex))
    F = np.asarray(F_ana, dtype=complex) @ np.asarray(F_dig, dtype=complex)
    if F.shape[0] != Z.shape[0]:
        raise DimensionError("precoder rows must equal the port count", "wire")
    if np.linalg.cond(Z) > COND_LIMIT:
        raise SingularConfigurationError("Z_ra is numerically singular", "wire")
    Y = np.linalg.inv(Z)
    Yh = 0.5 * (Y + Y.conj().T)
    P = float(np.real(np.trace(F.conj().T @ Yh @ F)))
    if P < -tol:
        raise PassivityError(f"negative radiated power {P:.3e}", "wire")
    return P


def excitation_vector(geom: WireGeometry, amplitudes=None) -> np.ndarray:
    """Voltage vector with unit (or given) amplitudes on the excited ports."""
    v = np.zeros(geom.num_ports, complex)
    amp = np.ones(len(geom.excited)) if amplitudes is None else np.asarray(amplitudes, dtype=complex)
    if amp.size != len(geom.excited):
        raise DimensionError("one amplitude per excited port", "wire")
    v[list(geom.excited)] = amp
    return v


def port_positions(geom: WireGeometry) -> np.ndarray:
    """Port z-coordinates, centred on the array middle."""
    return (np.arange(geom.num_ports) - (geom.num_ports - 1) / 2) * geom.spacing


def observation_channel(geom: WireGeometry, z, r) -> np.ndarray:
    """Scalar Green's function rows ``e^{-j k0 d}/(4 pi d)``, shape ``(G, N)``; NaN where d = 0."""
    zp = port_positions(geom)
    z = np.asarray(z, dtype=float).ravel()
    r = np.asarray(r, dtype=float).ravel()
    d = np.hypot(z[:, None] - zp[None, :], r[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.exp(-1j * geom.k0 * d) / (4 * np.pi * d)
    h[d == 0] = np.nan
    return h


def snr_field_map(geom: WireGeometry, z_grid, r_grid, noise_variance: float = 1.0, amplitudes=None,
                  Z_ra=None) -> np.ndarray:
    """Linear SNR ``|h F_ra v|^2 / sigma^2`` on the ``(len(r_grid), len(z_grid))`` grid.

    ``z_grid`` and ``r_grid`` are in metres; points on a port are NaN.
    """
    if noise_variance <= 0:
        raise InvalidParameterError("noise variance must be > 0", "wire")
    z_grid = np.asarray(z_grid, dtype=float).ravel()
    r_grid = np.asarray(r_grid, dtype=float).ravel()
    if z_grid.size == 0 or r_grid.size == 0:
        raise InvalidParameterError("observation grid is empty", "wire")
    Z = impedance_matrix(geom) if Z_ra is None else Z_ra
    i = wire_precoder(Z, port_loads(geom)) @ excitation_vector(geom, amplitudes)
    Zg, Rg = np.meshgrid(z_grid, r_grid)
    h = observation_channel(geom, Zg.ravel(), Rg.ravel())
    snr = np.abs(h @ i) ** 2 / noise_variance
    return snr.reshape(Rg.shape)


def write_field_map(path, snr, z_grid, r_grid, wavelength: float):
    """CSV with columns z_over_lambda, r_over_lambda, snr_db (NaN for masked points)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z_over_lambda", "r_over_lambda", "snr_db"])
        for a, r in enumerate(r_grid):
            for b, z in enumerate(z_grid):
                v = snr[a, b]
                db = 10 * np.log10(v) if np.isfinite(v) and v > 0 else float("nan")
                w.writerow([f"{z / wavelength:.6g}", f"{r / wavelength:.6g}", f"{db:.6g}"])


def count_nulls(snr, threshold_db: float = -10.0) -> int:
    """Grid points more than ``|threshold_db|`` below the peak of their radial row."""
    s = np.asarray(snr, dtype=float)
    s = np.atleast_2d(s)
    n = 0
    for row in s:
        ok = np.isfinite(row)
        n += int(np.sum(row[ok] < np.max(row[ok]) * 10 ** (threshold_db / 10)))
    return n


def null_location(snr, row: int = 0) -> int:
    """Index of the deepest point of one radial row (NaNs ignored)."""
    return int(np.nanargmin(np.atleast_2d(snr)[row]))


class WireFrontEnd(FrontEnd):
    """``H_eff,k = H_k F_ra E`` with ``F_ra = (Z_ra + diag(z_load))^{-1}``.

    ``E`` embeds the excited ports, which are the inputs seen by the analog
    and digital layers. The loads at non-excited ports are the tunable
    parameters.
    """

    def __init__(self, channel: ChannelTensor, geom: WireGeometry, Z_ra=None,
                 load_grid=(377.0, 50.0, 100.0, 200.0)):
        self.channel = channel
        self.geom = geom
        self.Z_ra = impedance_matrix(geom) if Z_ra is None else np.asarray(Z_ra, dtype=complex)
        self.load_grid = np.asarray(load_grid, dtype=complex)
        if channel.shape[1] != geom.num_ports:
            raise DimensionError("channel columns must equal the port count", "wire")
        self._F = wire_precoder(self.Z_ra, port_loads(geom))

    @property
    def num_subcarriers(self):
        return self.channel.num_subcarriers

    def precoder(self, k):
        return self._F @ self._embed()

    def _embed(self):
        E = np.zeros((self.geom.num_ports, len(self.geom.excited)))
        E[list(self.geom.excited), np.arange(len(self.geom.excited))] = 1.0
        return E

    def effective_channel(self, k):
        # only the excited ports carry precoded voltages
        return self.channel[k] @ self.precoder(k)

    def radiated_power(self, k, F_ana, F_dig):
        return radiated_power(self.Z_ra, self._embed() @ np.asarray(F_ana), F_dig)

    def power_weight(self, k):
        Y = np.linalg.inv(self.Z_ra)
        E = self._embed()
        return E.T @ (0.5 * (Y + Y.conj().T)) @ E

    def is_feasible(self):
        return bool(np.all(port_loads(self.geom).real >= 0))

    def parameter_grid(self):
        return [self.load_grid] * len(self.geom.loaded)

    def parameters(self):
        return np.broadcast_to(np.asarray(self.geom.z_load, dtype=complex), (len(self.geom.loaded),)).copy()

    def with_parameters(self, values):
        return WireFrontEnd(self.channel, self.geom.replace(z_load=tuple(np.asarray(values, complex))),
                            self.Z_ra, self.load_grid)
