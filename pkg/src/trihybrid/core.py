"""Generic tri-hybrid signal model.

The received signal on subcarrier ``k`` is modelled as

    y_k = H_eff,k(F_ra,k) F_ana,k F_dig,k x_k + n_k

where the reconfigurable-antenna layer is folded into the effective channel.
This module holds the containers for channels and precoders, the geometric
multipath generator, the objectives shared by all optimizers, and the
abstract front-end contract implemented by every architecture module.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .exceptions import (
    DimensionError,
    InvalidGeometryError,
    InvalidParameterError,
    ModelError,
    PassivityError,
)

__all__ = [
    "PathParams",
    "MultipathParams",
    "ArrayDescriptor",
    "ChannelTensor",
    "PrecoderSet",
    "NoiseModel",
    "FrontEnd",
    "FixedFrontEnd",
    "propagation_direction",
    "steering_vector",
    "subcarrier_frequencies",
    "generate_channel",
    "random_multipath",
    "mutual_information",
    "frobenius_matching",
    "check_power_budget",
    "as_matrix_stack",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def as_matrix_stack(a, name="matrix", K: Optional[int] = None) -> np.ndarray:
    """Return ``a`` as a complex ``(K, m, n)`` array.

    A single 2-D matrix is broadcast over ``K`` subcarriers when ``K`` is given.
    """
    arr = np.asarray(a, dtype=complex)
    if arr.ndim == 2:
        arr = arr[None, :, :] if K is None else np.broadcast_to(arr, (K,) + arr.shape)
    if arr.ndim != 3:
        raise DimensionError(f"{name} must be 2-D or 3-D, got shape {arr.shape}", "core")
    if K is not None and arr.shape[0] != K:
        raise DimensionError(f"{name} has {arr.shape[0]} subcarriers, expected {K}", "core")
    return arr


# ---------------------------------------------------------------------------
# geometry and channel containers


@dataclass(frozen=True)
class PathParams:
    """One propagation path. ``complex_gain=None`` means draw it at random."""

    complex_gain: Optional[complex]
    delay: float
    aod_az: float
    aod_el: float
    aoa_az: float
    aoa_el: float


@dataclass(frozen=True)
class MultipathParams:
    paths: tuple
    carrier_freq: float
    bandwidth: float
    num_subcarriers: int

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if len(self.paths) == 0:
            raise InvalidParameterError("multipath description needs at least one path", "core")
        if int(self.num_subcarriers) < 1:
            raise InvalidParameterError("num_subcarriers must be >= 1", "core")
        for p in self.paths:
            if not p.delay >= 0:
                raise InvalidParameterError(f"path delay must be >= 0, got {p.delay}", "core")


@dataclass(frozen=True)
class ArrayDescriptor:
    """Element positions (N x 3, metres) and operating wavelength (metres)."""

    element_positions: np.ndarray
    wavelength: float

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.element_positions, dtype=float))
        if pos.shape[-1] == 2:
            pos = np.column_stack([pos, np.zeros(pos.shape[0])])
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise InvalidGeometryError(f"element positions must be (N, 3), got {pos.shape}", "core")
        if not np.all(np.isfinite(pos)):
            raise InvalidGeometryError("element positions must be finite", "core")
        object.__setattr__(self, "element_positions", _frozen(pos))

    @property
    def num_elements(self) -> int:
        return self.element_positions.shape[0]

    @classmethod
    def uniform_linear(cls, n: int, wavelength: float, spacing: Optional[float] = None, axis: int = 1):
        """ULA along ``axis`` (0=x, 1=y, 2=z), default half-wavelength spacing."""
        d = wavelength / 2 if spacing is None else spacing
        pos = np.zeros((n, 3))
        pos[:, axis] = d * np.arange(n)
        return cls(pos, wavelength)

    @classmethod
    def uniform_planar(cls, n_y: int, n_z: int, wavelength: float, spacing: Optional[float] = None):
        """UPA in the y-z plane (broadside along +x)."""
        d = wavelength / 2 if spacing is None else spacing
        yy, zz = np.meshgrid(np.arange(n_y), np.arange(n_z), indexing="xy")
        pos = np.column_stack([np.zeros(n_y * n_z), d * yy.ravel(), d * zz.ravel()])
        return cls(pos, wavelength)


@dataclass(frozen=True)
class ChannelTensor:
    """Stack of per-subcarrier matrices ``H[k]`` with shape ``(K, rows, cols)``."""

    matrices: np.ndarray
    frequencies: Optional[np.ndarray] = None

    def __post_init__(self):
        H = as_matrix_stack(self.matrices, "channel")
        if not np.all(np.isfinite(H)):
            raise ModelError("channel entries must be finite", "core")
        object.__setattr__(self, "matrices", _frozen(H))
        if self.frequencies is not None:
            f = np.asarray(self.frequencies, dtype=float).ravel()
            if f.size != H.shape[0]:
                raise DimensionError("one frequency per subcarrier expected", "core")
            object.__setattr__(self, "frequencies", _frozen(f))

    @property
    def num_subcarriers(self) -> int:
        return self.matrices.shape[0]

    @property
    def shape(self):
        return self.matrices.shape[1:]

    def __getitem__(self, k):
        return self.matrices[k]

    def __len__(self):
        return self.num_subcarriers


@dataclass(frozen=True)
class PrecoderSet:
    """Digital and analog precoders per subcarrier plus an opaque antenna config.

    ``F_dig`` has shape ``(K, N_in, N_S)`` and ``F_ana`` ``(K, N_out, N_in)``.
    When ``F_ana`` is omitted it defaults to the identity (fully digital).
    """

    F_dig: np.ndarray
    F_ana: Optional[np.ndarray] = None
    antenna_config: Any = None

    def __post_init__(self):
        Fd = as_matrix_stack(self.F_dig, "F_dig")
        K = Fd.shape[0]
        if self.F_ana is None:
            Fa = np.broadcast_to(np.eye(Fd.shape[1], dtype=complex), (K, Fd.shape[1], Fd.shape[1]))
        else:
            Fa = as_matrix_stack(self.F_ana, "F_ana")
            if Fa.shape[0] == 1 and K > 1:
                Fa = np.broadcast_to(Fa, (K,) + Fa.shape[1:])
            elif Fd.shape[0] == 1 and Fa.shape[0] > 1:
                Fd = np.broadcast_to(Fd, (Fa.shape[0],) + Fd.shape[1:])
                K = Fa.shape[0]
        if Fa.shape[0] != Fd.shape[0]:
            raise DimensionError("F_ana and F_dig disagree on subcarrier count", "core")
        if Fa.shape[2] != Fd.shape[1]:
            raise DimensionError(
                f"F_ana columns ({Fa.shape[2]}) must equal F_dig rows ({Fd.shape[1]})", "core"
            )
        object.__setattr__(self, "F_dig", _frozen(Fd))
        object.__setattr__(self, "F_ana", _frozen(Fa))

    @property
    def num_subcarriers(self) -> int:
        return self.F_dig.shape[0]

    @property
    def num_streams(self) -> int:
        return self.F_dig.shape[2]

    def combined(self) -> np.ndarray:
        """``F_ana @ F_dig`` per subcarrier."""
        return self.F_ana @ self.F_dig

    def scaled(self, c: complex) -> "PrecoderSet":
        return PrecoderSet(self.F_dig * c, self.F_ana, self.antenna_config)


@dataclass(frozen=True)
class NoiseModel:
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise InvalidParameterError("noise variance must be > 0", "core")


# ---------------------------------------------------------------------------
# front-end contract


class FrontEnd(abc.ABC):
    """Behavioural contract of a reconfigurable-antenna front end.

    Subclasses are immutable; reconfiguring returns a new object.
    """

    @property
    @abc.abstractmethod
    def num_subcarriers(self) -> int:
        ...

    @abc.abstractmethod
    def effective_channel(self, k: int) -> np.ndarray:
        """Effective channel seen by the analog/digital layers on subcarrier ``k``."""

    @abc.abstractmethod
    def radiated_power(self, k: int, F_ana, F_dig) -> float:
        """Radiated power in Watts for the given precoders."""

    @abc.abstractmethod
    def is_feasible(self) -> bool:
        """Membership test of the current configuration in the feasible set."""

    def precoder(self, k: int) -> np.ndarray:
        """Reconfigurable-antenna precoder ``F_ra,k`` when the model is separable."""
        raise NotImplementedError(f"{type(self).__name__} has no separable F_ra")

    def power_weight(self, k: int) -> np.ndarray:
        """Hermitian matrix ``W`` such that ``P_k = Tr(F^H W F)`` for ``F = F_ana F_dig``.

        The default probes :meth:`radiated_power` with unit and paired
        excitations, which is exact for any quadratic power model.
        """
        n = self.effective_channel(k).shape[1]
        I = np.eye(n, dtype=complex)

        def P(x):
            return self.radiated_power(k, I, x[:, None])

        d = np.array([P(I[i]) for i in range(n)])
        W = np.diag(d).astype(complex)
        for i in range(n):
            for j in range(i + 1, n):
                re = 0.5 * (P(I[i] + I[j]) - d[i] - d[j])
                im = -0.5 * (P(I[i] + 1j * I[j]) - d[i] - d[j])
                W[i, j] = re + 1j * im
                W[j, i] = re - 1j * im
        return W

    def effective_channels(self) -> ChannelTensor:
        return ChannelTensor(np.stack([self.effective_channel(k) for k in range(self.num_subcarriers)]))

    def total_radiated_power(self, precoders: PrecoderSet) -> float:
        return float(
            sum(
                self.radiated_power(k, precoders.F_ana[k], precoders.F_dig[k])
                for k in range(precoders.num_subcarriers)
            )
        )

    # optional hooks used by the generic coordinate search
    def parameter_grid(self):
        """List of 1-D candidate arrays, one per tunable coordinate."""
        raise NotImplementedError

    def parameters(self) -> np.ndarray:
        raise NotImplementedError

    def with_parameters(self, values) -> "FrontEnd":
        raise NotImplementedError


class FixedFrontEnd(FrontEnd):
    """Non-reconfigurable baseline: H_eff = H and P = ||F_ana F_dig||^2."""

    def __init__(self, channel: ChannelTensor):
        self.channel = channel

    @property
    def num_subcarriers(self) -> int:
        return self.channel.num_subcarriers

    def effective_channel(self, k):
        return self.channel[k]

    def precoder(self, k):
        return np.eye(self.channel.shape[1], dtype=complex)

    def power_weight(self, k):
        return np.eye(self.channel.shape[1], dtype=complex)

    def radiated_power(self, k, F_ana, F_dig):
        return float(np.linalg.norm(np.asarray(F_ana) @ np.asarray(F_dig)) ** 2)

    def is_feasible(self):
        return True


# ---------------------------------------------------------------------------
# geometry helpers


def propagation_direction(az: float, el: float) -> np.ndarray:
    """Unit vector for azimuth ``az`` and elevation ``el`` (radians)."""
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def steering_vector(array: ArrayDescriptor, az: float, el: float) -> np.ndarray:
    """Far-field array response, entry ``n = exp(-j 2pi/lambda <p_n, u>)``."""
    if not array.wavelength > 0:
        raise InvalidGeometryError("wavelength must be positive", "core")
    u = propagation_direction(az, el)
    return np.exp(-2j * np.pi / array.wavelength * (array.element_positions @ u))


def subcarrier_frequencies(carrier_freq: float, bandwidth: float, K: int) -> np.ndarray:
    """Uniform grid ``f_k = f_c + (k - K/2) B / K``."""
    k = np.arange(K)
    return carrier_freq + (k - K / 2) * bandwidth / K


def generate_channel(
    params: MultipathParams,
    tx: ArrayDescriptor,
    rx: ArrayDescriptor,
    seed: Optional[int] = None,
) -> ChannelTensor:
    """Geometric multipath OFDM channel.

    ``H_k = sum_p g_p a_rx(p) a_tx(p)^H exp(-j 2pi f_k tau_p)``. Paths whose
    gain is ``None`` get a CN(0, 1/P_rand) draw from a generator seeded by
    ``seed`` so the random paths carry unit total variance.
    """
    rng = np.random.default_rng(seed)
    n_rand = sum(p.complex_gain is None for p in params.paths)
    K = params.num_subcarriers
    f = subcarrier_frequencies(params.carrier_freq, params.bandwidth, K)
    H = np.zeros((K, rx.num_elements, tx.num_elements), dtype=complex)
    for p in params.paths:
        if p.complex_gain is None:
            g = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2 * n_rand)
        else:
            g = complex(p.complex_gain)
        a_r = steering_vector(rx, p.aoa_az, p.aoa_el)
        a_t = steering_vector(tx, p.aod_az, p.aod_el)
        H += g * np.exp(-2j * np.pi * f * p.delay)[:, None, None] * np.outer(a_r, a_t.conj())[None]
    return ChannelTensor(H, f)


def random_multipath(
    rng: np.random.Generator,
    num_paths: int,
    carrier_freq: float,
    bandwidth: float,
    num_subcarriers: int,
    max_delay: Optional[float] = None,
    el_spread: float = np.pi / 12,
) -> MultipathParams:
    """Draw path angles and delays; gains are left random (``None``)."""
    if max_delay is None:
        max_delay = num_subcarriers / (4 * bandwidth)
    paths = []
    for _ in range(num_paths):
        paths.append(
            PathParams(
                complex_gain=None,
                delay=float(rng.uniform(0, max_delay)),
                aod_az=float(rng.uniform(-np.pi / 3, np.pi / 3)),
                aod_el=float(rng.uniform(-el_spread, el_spread)),
                aoa_az=float(rng.uniform(-np.pi / 3, np.pi / 3)),
                aoa_el=float(rng.uniform(-el_spread, el_spread)),
            )
        )
    return MultipathParams(tuple(paths), carrier_freq, bandwidth, num_subcarriers)


# ---------------------------------------------------------------------------
# objectives


def _logdet_eye_plus(A: np.ndarray) -> float:
    """Natural log of det(I + A) for Hermitian PSD ``A``."""
    A = 0.5 * (A + A.conj().T)
    M = np.eye(A.shape[0]) + A
    try:
        L = np.linalg.cholesky(M)
        return float(2.0 * np.sum(np.log(np.abs(np.diag(L)))))
    except np.linalg.LinAlgError:
        sign, val = np.linalg.slogdet(M)
        return float(val)


def mutual_information(H_eff, precoders: PrecoderSet, noise: NoiseModel) -> float:
    """Average mutual information in bits/s/Hz over subcarriers."""
    H = H_eff.matrices if isinstance(H_eff, ChannelTensor) else as_matrix_stack(H_eff, "H_eff")
    F = precoders.combined()
    if F.shape[0] == 1 and H.shape[0] > 1:
        F = np.broadcast_to(F, (H.shape[0],) + F.shape[1:])
    if H.shape[0] != F.shape[0]:
        raise DimensionError("channel and precoders disagree on subcarrier count", "core")
    if H.shape[2] != F.shape[1]:
        raise DimensionError(
            f"effective channel has {H.shape[2]} inputs, precoder drives {F.shape[1]}", "core"
        )
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(F))):
        raise ModelError("non-finite input to mutual information", "core")
    total = 0.0
    for k in range(H.shape[0]):
        G = H[k] @ F[k]
        # the smaller Gram matrix gives the same determinant
        A = (G.conj().T @ G) if G.shape[1] <= G.shape[0] else (G @ G.conj().T)
        total += _logdet_eye_plus(A / noise.variance)
    return max(total / H.shape[0] / np.log(2.0), 0.0)


def frobenius_matching(F_opt, precoders: PrecoderSet, front_end) -> float:
    """Sum over subcarriers of ``||F_opt,k - F_ra,k F_ana,k F_dig,k||_F^2``.

    ``front_end`` may be a :class:`FrontEnd` or an ``F_ra`` array/stack.
    """
    Fo = F_opt.matrices if isinstance(F_opt, ChannelTensor) else as_matrix_stack(F_opt, "F_opt")
    K = Fo.shape[0]
    FaFd = precoders.combined()
    if FaFd.shape[0] == 1 and K > 1:
        FaFd = np.broadcast_to(FaFd, (K,) + FaFd.shape[1:])
    if isinstance(front_end, FrontEnd):
        Fra = np.stack([front_end.precoder(k) for k in range(K)])
    else:
        Fra = as_matrix_stack(front_end, "F_ra")
        if Fra.shape[0] == 1 and K > 1:
            Fra = np.broadcast_to(Fra, (K,) + Fra.shape[1:])
    if Fra.shape[2] != FaFd.shape[1] or Fra.shape[1] != Fo.shape[1] or FaFd.shape[2] != Fo.shape[2]:
        raise DimensionError(
            f"cannot match F_opt {Fo.shape[1:]} with F_ra {Fra.shape[1:]} x F_ana F_dig {FaFd.shape[1:]}",
            "core",
        )
    D = Fo - Fra @ FaFd
    return float(np.sum(np.abs(D) ** 2))


def check_power_budget(powers: Sequence[float], p_max: float) -> bool:
    """True iff ``sum(powers) <= p_max`` (boundary inclusive)."""
    p = np.asarray(powers, dtype=float).ravel()
    if not np.all(np.isfinite(p)):
        raise InvalidParameterError("powers must be finite", "core")
    if np.any(p < 0):
        raise PassivityError(f"negative per-subcarrier power {p.min():.3e}", "core")
    return bool(np.sum(p) <= p_max)
