"""Stacked intelligent metasurfaces via transfer-scattering (T) parameters.

Each layer is a diagonal two-port per meta-atom; interlayer propagation is a
``2N_m x 2N_m`` T-matrix. The end-to-end response is ``Psi = (T_I,22)^{-1}``
with ``T_I = G1 P1 G2 ... P_{L-1} G_L``.

Convention: a reflectionless propagation block with forward field transfer
``W`` (layer l -> l+1) is ``P = blkdiag(W^T, W^{-1})``, so that for ideal
layers ``Psi = Theta_L W ... W Theta_1``, the direct forward product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .core import ChannelTensor, FrontEnd, as_matrix_stack
from .exceptions import DimensionError, InvalidGeometryError, InvalidParameterError, SingularConfigurationError

__all__ = [
    "MetaLayer",
    "SimGeometry",
    "layer_tparam",
    "rs_kernel",
    "rs_propagation",
    "propagation_tparam",
    "SimStack",
    "cascade",
    "direct_response",
    "effective_channel",
    "radiated_power",
    "feed_channel",
    "SimFrontEnd",
]

COND_LIMIT = 1e12


@dataclass(frozen=True)
class MetaLayer:
    """Per-atom transmission ``T`` and reflection ``R`` coefficients."""

    T: np.ndarray
    R: Optional[np.ndarray] = None

    def __post_init__(self):
        T = np.atleast_1d(np.asarray(self.T, dtype=complex)).ravel()
        R = np.zeros_like(T) if self.R is None else np.atleast_1d(np.asarray(self.R, dtype=complex)).ravel()
        if R.shape != T.shape:
            raise DimensionError("T and R must have one entry per atom", "sim_stack")
        T.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "R", R)

    @classmethod
    def from_phases(cls, theta) -> "MetaLayer":
        """Ideal lossless reflectionless layer with ``T_n = e^{j theta_n}``."""
        return cls(np.exp(1j * np.asarray(theta, dtype=float)))

    @property
    def num_atoms(self) -> int:
        return self.T.size

    @property
    def is_ideal(self) -> bool:
        return bool(np.all(self.R == 0) and np.allclose(np.abs(self.T), 1.0, atol=1e-14))

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.T)


@dataclass(frozen=True)
class SimGeometry:
    """Square-grid layers stacked along z.

    Attributes
    ----------
    n_side : int
        Atoms per side; ``N_m = n_side**2``.
    pitch : float
        Atom spacing within a layer (m).
    layer_spacing : float
        Distance between consecutive layers (m).
    wavelength : float
    atom_area : float, optional
        Defaults to ``pitch**2``.
    """

    n_side: int
    pitch: float
    layer_spacing: float
    wavelength: float
    atom_area: Optional[float] = None

    def __post_init__(self):
        if self.n_side < 1:
            raise InvalidGeometryError("n_side must be >= 1", "sim_stack")
        if not (self.pitch > 0 and self.wavelength > 0):
            raise InvalidGeometryError("pitch and wavelength must be > 0", "sim_stack")
        if not self.layer_spacing > 0:
            raise InvalidGeometryError("layer spacing must be > 0", "sim_stack")
        if self.atom_area is None:
            object.__setattr__(self, "atom_area", self.pitch ** 2)

    @property
    def num_atoms(self) -> int:
        return self.n_side ** 2

    def atom_positions(self, z: float = 0.0) -> np.ndarray:
        c = (np.arange(self.n_side) - (self.n_side - 1) / 2) * self.pitch
        X, Y = np.meshgrid(c, c, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, z)])


def layer_tparam(layer: MetaLayer) -> np.ndarray:
    """Layer T-matrix ``[[T - R^2/T, R/T], [-R/T, 1/T]]`` with diagonal blocks."""
    T, R = layer.T, layer.R
    if np.any(T == 0):
        raise SingularConfigurationError("opaque meta-atom (T = 0) has no T-parameter representation",
                                         "sim_stack")
    return np.block([[np.diag(T - R ** 2 / T), np.diag(R / T)],
                     [np.diag(-R / T), np.diag(1.0 / T)]])


def rs_kernel(src, dst, wavelength: float, atom_area: float) -> np.ndarray:
    """Rayleigh-Sommerfeld transfer ``W[dst, src]`` between parallel planes.

    ``W = (A cos(chi) / d) (1/(2 pi d) - j/lambda) e^{j 2 pi d / lambda}``
    with ``cos(chi) = dz / d``.
    """
    src = np.atleast_2d(np.asarray(src, dtype=float))
    dst = np.atleast_2d(np.asarray(dst, dtype=float))
    diff = dst[:, None, :] - src[None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    if np.any(d == 0):
        raise InvalidGeometryError("coincident source and destination points", "sim_stack")
    cos_chi = np.abs(diff[..., 2]) / d
    return (atom_area * cos_chi / d) * (1.0 / (2 * np.pi * d) - 1j / wavelength) * np.exp(2j * np.pi * d / wavelength)


def propagation_tparam(W: np.ndarray) -> np.ndarray:
    """Reflectionless T-matrix ``blkdiag(W^T, W^{-1})`` for forward transfer ``W``."""
    W = np.asarray(W, dtype=complex)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DimensionError("interlayer transfer must be square", "sim_stack")
    if np.linalg.cond(W) > COND_LIMIT:
        raise SingularConfigurationError("interlayer transfer is numerically singular", "sim_stack")
    return sla.block_diag(W.T, np.linalg.inv(W))


def rs_propagation(geometry: Optional[SimGeometry], N_m: Optional[int] = None, mode: str = "rs",
                   W: Optional[np.ndarray] = None):
    """Interlayer T-matrix and its forward transfer ``W``.

    ``mode="rs"`` builds ``W`` from the Rayleigh-Sommerfeld kernel;
    ``mode="ideal"`` uses the supplied unitary ``W`` (identity by default).
    Returns ``(P, W)``.
    """
    if mode == "rs":
        if geometry is None:
            raise InvalidParameterError("rs mode needs a geometry", "sim_stack")
        W = rs_kernel(geometry.atom_positions(0.0), geometry.atom_positions(geometry.layer_spacing),
                      geometry.wavelength, geometry.atom_area)
    elif mode == "ideal":
        n = N_m if N_m is not None else (geometry.num_atoms if geometry is not None else None)
        if W is None:
            if n is None:
                raise InvalidParameterError("ideal mode needs N_m or W", "sim_stack")
            W = np.eye(n, dtype=complex)
        W = np.asarray(W, dtype=complex)
        if not np.allclose(W.conj().T @ W, np.eye(W.shape[0]), atol=1e-10):
            raise InvalidParameterError("ideal-mode transfer must be unitary", "sim_stack")
    else:
        raise InvalidParameterError(f"unknown propagation mode {mode!r}", "sim_stack")
    return propagation_tparam(W), W


@dataclass(frozen=True)
class SimStack:
    """``L`` layers, ``L-1`` interlayer T-matrices, and the feed channel ``H_IT``."""

    layers: tuple
    propagation: tuple
    H_IT: np.ndarray

    def __post_init__(self):
        layers = tuple(self.layers)
        props = tuple(np.asarray(P, dtype=complex) for P in self.propagation)
        if len(layers) < 1:
            raise InvalidParameterError("a SIM needs at least one layer", "sim_stack")
        if len(props) != len(layers) - 1:
            raise DimensionError(f"{len(layers)} layers need {len(layers) - 1} propagation matrices", "sim_stack")
        n = layers[0].num_atoms
        if any(l.num_atoms != n for l in layers):
            raise DimensionError("all layers must have the same atom count", "sim_stack")
        if any(P.shape != (2 * n, 2 * n) for P in props):
            raise DimensionError(f"propagation matrices must be {2 * n}x{2 * n}", "sim_stack")
        H = np.atleast_2d(np.asarray(self.H_IT, dtype=complex))
        if H.shape[0] != n:
            raise DimensionError(f"H_IT must have {n} rows", "sim_stack")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "propagation", props)
        object.__setattr__(self, "H_IT", H)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def num_atoms(self) -> int:
        return self.layers[0].num_atoms

    def with_phases(self, thetas) -> "SimStack":
        thetas = np.asarray(thetas, dtype=float).reshape(self.num_layers, self.num_atoms)
        return SimStack(tuple(MetaLayer.from_phases(t) for t in thetas), self.propagation, self.H_IT)


def cascade(stack: SimStack) -> np.ndarray:
    """End-to-end response ``Psi = (T_I,22)^{-1}``."""
    n = stack.num_atoms
    T = layer_tparam(stack.layers[0])
    for P, layer in zip(stack.propagation, stack.layers[1:]):
        T = T @ P @ layer_tparam(layer)
    T22 = T[n:, n:]
    if np.linalg.cond(T22) > COND_LIMIT:
        raise SingularConfigurationError("T_I,22 is numerically singular (non-transmissive stack)", "sim_stack")
    return np.linalg.inv(T22)


def direct_response(thetas, transfers: Sequence[np.ndarray]) -> np.ndarray:
    """Forward field propagation ``Theta_L W_{L-1} ... W_1 Theta_1``."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if len(transfers) != thetas.shape[0] - 1:
        raise DimensionError("need one transfer matrix between consecutive layers", "sim_stack")
    Psi = np.diag(np.exp(1j * thetas[0]))
    for W, th in zip(transfers, thetas[1:]):
        Psi = np.exp(1j * th)[:, None] * (W @ Psi)
    return Psi


def effective_channel(H_RI, Psi, H_IT) -> np.ndarray:
    """``H_RI Psi H_IT`` (``H_RI`` may be a ``(K, N_R, N_m)`` stack)."""
    H_RI = np.asarray(H_RI, dtype=complex)
    Psi = np.atleast_2d(np.asarray(Psi, dtype=complex))
    H_IT = np.atleast_2d(np.asarray(H_IT, dtype=complex))
    if H_RI.shape[-1] != Psi.shape[0] or Psi.shape[1] != H_IT.shape[0]:
        raise DimensionError(f"cannot chain H_RI {H_RI.shape}, Psi {Psi.shape}, H_IT {H_IT.shape}", "sim_stack")
    return H_RI @ (Psi @ H_IT)


def radiated_power(Psi, H_IT, F_ana, F_dig) -> float:
    """``||Psi H_IT F_ana F_dig||_F^2``."""
    Psi = np.atleast_2d(np.asarray(Psi, dtype=complex))
    H_IT = np.atleast_2d(np.asarray(H_IT, dtype=complex))
    F = np.asarray(F_ana, dtype=complex) @ np.asarray(F_dig, dtype=complex)
    if Psi.shape[1] != H_IT.shape[0] or H_IT.shape[1] != F.shape[0]:
        raise DimensionError("Psi, H_IT and the precoder are not conformable", "sim_stack")
    return float(np.linalg.norm(Psi @ H_IT @ F) ** 2)


def feed_channel(geometry: SimGeometry, M: int, distance: Optional[float] = None, normalize: bool = True):
    """RS transfer from an ``M``-antenna line feed to the first layer, ``(N_m, M)``.

    The feed sits ``distance`` below the first layer (default: one layer
    spacing). With ``normalize`` the columns are scaled to unit norm.
    """
    lam = geometry.wavelength
    d = geometry.layer_spacing if distance is None else distance
    x = (np.arange(M) - (M - 1) / 2) * lam / 2
    src = np.column_stack([x, np.zeros(M), np.full(M, -d)])
    H = rs_kernel(src, geometry.atom_positions(0.0), lam, geometry.atom_area)
    if normalize:
        H = H / np.linalg.norm(H, axis=0, keepdims=True)
    return H


class SimFrontEnd(FrontEnd):
    """SIM front end; one ``Psi`` is shared by every subcarrier.

    Parameters
    ----------
    channel : ChannelTensor
        ``H_RI,k`` of shape ``(K, N_R, N_m)``.
    stack : SimStack
    levels : int
        Phase grid size for the coordinate search.
    """

    def __init__(self, channel: ChannelTensor, stack: SimStack, levels: int = 64):
        self.channel = channel
        self.stack = stack
        self.levels = int(levels)
        if channel.shape[1] != stack.num_atoms:
            raise DimensionError("H_RI columns must equal the atom count", "sim_stack")
        self._Psi = cascade(stack)

    @property
    def num_subcarriers(self):
        return self.channel.num_subcarriers

    @property
    def Psi(self) -> np.ndarray:
        return self._Psi

    def effective_channel(self, k):
        return effective_channel(self.channel[k], self._Psi, self.stack.H_IT)

    def radiated_power(self, k, F_ana, F_dig):
        return radiated_power(self._Psi, self.stack.H_IT, F_ana, F_dig)

    def power_weight(self, k):
        A = self._Psi @ self.stack.H_IT
        return A.conj().T @ A

    def is_feasible(self):
        return all(l.is_ideal for l in self.stack.layers)

    def parameter_grid(self):
        g = 2 * np.pi * np.arange(self.levels) / self.levels
        return [g] * (self.stack.num_layers * self.stack.num_atoms)

    def parameters(self):
        return np.mod(np.concatenate([l.phases for l in self.stack.layers]), 2 * np.pi)

    def with_parameters(self, values):
        return SimFrontEnd(self.channel, self.stack.with_phases(values), self.levels)
