"""Configuration and precoding algorithms shared by the architecture models.

All search routines maximize (or, for matching, minimize) with
accept-if-strictly-better updates, so their objective traces are monotone.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import FrontEnd, PrecoderSet, as_matrix_stack
from .dma import DmaConfig, DmaGeometry, realized_gain
from .exceptions import (
    DimensionError,
    InfeasibleError,
    InvalidParameterError,
    SingularConfigurationError,
)
from .pixel_fas import SelectionState, StateDictionary
from .polarization import PolarizationState, default_grid, grid_vectors

__all__ = [
    "OptimizerBudget",
    "waterfilling",
    "waterfilling_batch",
    "waterfill_precoder",
    "waterfill_se_batch",
    "quantize_uniform",
    "quantized_zf",
    "zf_sum_rate",
    "zf_sum_rate_batch",
    "genetic_dma",
    "dma_gain_objective",
    "coordinate_ascent",
    "coordinate_ascent_sim",
    "exhaustive_selection",
    "greedy_selection",
    "pair_grid_search",
    "polarization_grid_search",
    "pass_phase_alignment",
    "coordinate_search",
    "two_stage_matching",
    "alternating_trihybrid",
]


@dataclass(frozen=True)
class OptimizerBudget:
    """Iteration and population budgets plus the RNG seed."""

    max_iter: int = 20
    population: int = 32
    generations: int = 100
    tournament: int = 3
    mutation: Optional[float] = None
    seed: int = 0
    tol: float = 1e-12
    sweeps: int = 3

    def __post_init__(self):
        if min(self.max_iter, self.population, self.generations, self.tournament, self.sweeps) < 1:
            raise InvalidParameterError("optimizer budgets must be positive", "optimizers")
        if self.tol < 0:
            raise InvalidParameterError("tolerance must be >= 0", "optimizers")


# ---------------------------------------------------------------------------
# waterfilling


def waterfilling(gains, P_total: float, noise: float = 1.0, tol: float = 1e-13, max_iter: int = 500):
    """Power allocation ``p_i = max(0, mu - noise/g_i)`` with ``sum p = P_total``.

    The water level ``mu`` is found by bisection.
    """
    g = np.asarray(gains, dtype=float).ravel()
    if np.any(g < 0):
        raise InvalidParameterError("channel gains must be >= 0", "optimizers")
    if not P_total > 0:
        raise InvalidParameterError("power budget must be > 0", "optimizers")
    if not np.any(g > 0):
        raise InvalidParameterError("all channel gains are zero", "optimizers")
    act = g > 0
    inv = np.full(g.shape, np.inf)
    inv[act] = noise / g[act]
    lo, hi = float(inv[act].min()), float(inv[act].min() + P_total)
    for _ in range(max_iter):
        mu = 0.5 * (lo + hi)
        s = np.sum(np.maximum(mu - inv[act], 0.0))
        if s > P_total:
            hi = mu
        else:
            lo = mu
        if hi - lo <= tol * max(1.0, hi):
            break
    mu = 0.5 * (lo + hi)
    p = np.maximum(mu - inv, 0.0)
    p[~act] = 0.0
    # remove the residual bisection error on the active set
    s = p.sum()
    if s > 0:
        on = p > 0
        p[on] += (P_total - s) / on.sum()
    return p


def waterfilling_batch(gains, P_total: float, noise: float = 1.0) -> np.ndarray:
    """Exact waterfilling on each row of ``gains`` (``(B, n)``) by sorting."""
    g = np.asarray(gains, dtype=float)
    B, n = g.shape
    inv = np.where(g > 0, noise / np.where(g > 0, g, 1.0), np.inf)
    s = np.sort(inv, axis=1)
    csum = np.cumsum(np.where(np.isfinite(s), s, 0.0), axis=1)
    k = np.arange(1, n + 1)
    mu_k = (P_total + csum) / k
    ok = (mu_k > s) & np.isfinite(s)
    kk = np.where(ok.any(axis=1), n - 1 - np.argmax(ok[:, ::-1], axis=1), 0)
    mu = mu_k[np.arange(B), kk]
    return np.maximum(mu[:, None] - inv, 0.0)


def _weight_sqrt(Wt: np.ndarray, rel: float = 1e-12):
    w, U = np.linalg.eigh(0.5 * (Wt + Wt.conj().T))
    keep = w > rel * max(w.max(), 0.0)
    if not np.any(keep):
        raise SingularConfigurationError("power weight is zero: nothing radiates", "optimizers")
    return U[:, keep] / np.sqrt(w[keep])[None, :]


def waterfill_precoder(H, P_total: float, noise: float = 1.0, weight=None, num_streams: Optional[int] = None):
    """Capacity-achieving precoders under ``sum_k Tr(F_k^H W_k F_k) <= P_total``.

    Power is waterfilled jointly over all subcarriers and eigenmodes of the
    whitened channels ``H_k W_k^{-1/2}``.

    Returns
    -------
    F : ndarray, shape (K, N_in, N_S)
    se : float
        Average spectral efficiency in bits/s/Hz.
    """
    H = as_matrix_stack(H, "H")
    K, R, C = H.shape
    Ws = []
    for k in range(K):
        Wk = np.eye(C) if weight is None else np.asarray(weight[k] if np.ndim(weight) == 3 else weight)
        Ws.append(_weight_sqrt(Wk))
    ns = min(R, C) if num_streams is None else int(num_streams)
    gains, vecs = [], []
    for k in range(K):
        U, s, Vh = np.linalg.svd(H[k] @ Ws[k])
        s = np.concatenate([s, np.zeros(ns)])[:ns]
        V = Vh.conj().T
        V = np.concatenate([V, np.zeros((V.shape[0], ns))], axis=1)[:, :ns]
        gains.append(s ** 2)
        vecs.append(Ws[k] @ V)
    g = np.concatenate(gains)
    p = waterfilling(g, P_total, noise).reshape(K, ns)
    F = np.stack([vecs[k] * np.sqrt(p[k])[None, :] for k in range(K)])
    se = float(np.sum(np.log2(1.0 + p * g.reshape(K, ns) / noise)) / K)
    return F, se


def waterfill_se_batch(H, P_total: float, noise: float = 1.0, weight=None) -> np.ndarray:
    """Spectral efficiency of joint waterfilling for a batch ``(B, K, R, C)``.

    ``weight`` is an optional ``(B, C)`` diagonal power weight.
    """
    H = np.asarray(H, dtype=complex)
    B, K = H.shape[:2]
    if weight is not None:
        w = np.asarray(weight, dtype=float)
        with np.errstate(divide="ignore"):
            H = H * np.where(w > 0, 1 / np.sqrt(np.where(w > 0, w, 1.0)), 0.0)[:, None, None, :]
    s = np.linalg.svd(H, compute_uv=False)
    g = (s ** 2).reshape(B, -1)
    p = waterfilling_batch(g, P_total, noise)
    return np.sum(np.log2(1.0 + p * g / noise), axis=1) / K


# ---------------------------------------------------------------------------
# quantized zero forcing


def quantize_uniform(X, bits: int, scale: Optional[float] = None) -> np.ndarray:
    """Mid-rise uniform quantizer with ``2**bits`` levels on Re and Im.

    The full-scale range ``[-scale, scale]`` defaults to the largest real or
    imaginary magnitude in ``X``.
    """
    X = np.asarray(X, dtype=complex)
    if bits < 1:
        raise InvalidParameterError("bits must be >= 1", "optimizers")
    m = float(max(np.abs(X.real).max(), np.abs(X.imag).max())) if scale is None else float(scale)
    if m == 0:
        return np.zeros_like(X)
    n = 2 ** bits
    step = 2 * m / n
    top = (n / 2 - 0.5) * step

    def q(x):
        return np.clip(step * (np.floor(x / step) + 0.5), -top, top)

    return q(X.real) + 1j * q(X.imag)


def quantized_zf(H_eff, bits: Optional[int], power: float = 1.0, weight=None) -> np.ndarray:
    """Zero-forcing precoder ``H^+``, quantized per entry, renormalized to ``power``.

    ``bits=None`` skips quantization. ``weight`` is an optional power-weight
    matrix so that ``Tr(F^H W F) = power``.
    """
    H = np.atleast_2d(np.asarray(H_eff, dtype=complex))
    if bits is not None and not 1 <= bits <= 16:
        raise InvalidParameterError("bits must lie in [1, 16]", "optimizers")
    s = np.linalg.svd(H, compute_uv=False)
    if s.size < H.shape[0] or s[-1] <= 1e-12 * s[0]:
        raise SingularConfigurationError("zero forcing needs a full-row-rank channel", "optimizers")
    F = np.linalg.pinv(H)
    if bits is not None:
        F = quantize_uniform(F, bits)
    W = np.eye(F.shape[0]) if weight is None else np.asarray(weight)
    P = float(np.real(np.trace(F.conj().T @ W @ F)))
    if P <= 0:
        raise SingularConfigurationError("quantized precoder is zero", "optimizers")
    return F * np.sqrt(power / P)


def zf_sum_rate(H, F, noise: float = 1.0) -> float:
    """Sum rate of single-antenna users with residual inter-user interference."""
    G = np.abs(np.asarray(H) @ np.asarray(F)) ** 2
    sig = np.diag(G)
    intf = G.sum(axis=1) - sig
    return float(np.sum(np.log2(1.0 + sig / (intf + noise))))


def zf_sum_rate_batch(H, bits: Optional[int], power: float, noise: float = 1.0, weight=None) -> np.ndarray:
    """Quantized-ZF sum rate for a batch of square channels ``(B, U, M)``."""
    H = np.asarray(H, dtype=complex)
    try:
        F = np.linalg.inv(H) if H.shape[-1] == H.shape[-2] else np.linalg.pinv(H)
    except np.linalg.LinAlgError:
        F = np.linalg.pinv(H)
    if bits is not None:
        m = np.maximum(np.abs(F.real).max(axis=(1, 2)), np.abs(F.imag).max(axis=(1, 2)))
        n = 2 ** bits
        step = (2 * m / n)[:, None, None]
        top = (n / 2 - 0.5) * step
        F = (np.clip(step * (np.floor(F.real / step) + 0.5), -top, top)
             + 1j * np.clip(step * (np.floor(F.imag / step) + 0.5), -top, top))
    if weight is None:
        P = np.sum(np.abs(F) ** 2, axis=(1, 2))
    else:
        P = np.real(np.einsum("bij,jk,bki->b", F.conj().transpose(0, 2, 1), weight, F))
    F = F * np.sqrt(power / np.where(P > 0, P, np.inf))[:, None, None]
    G = np.abs(H @ F) ** 2
    sig = np.diagonal(G, axis1=1, axis2=2)
    intf = G.sum(axis=2) - sig
    r = np.sum(np.log2(1.0 + sig / (intf + noise)), axis=1)
    return np.where(np.isfinite(r), r, 0.0)


# ---------------------------------------------------------------------------
# genetic DMA search


def dma_gain_objective(geom: DmaGeometry, k0: float, u=(0.0, 0.0)) -> Callable:
    """Batched realized gain toward direction cosines ``u``."""

    def f(Z):
        return np.atleast_1d(realized_gain(geom, np.atleast_2d(Z), k0, u))

    return f


def genetic_dma(objective: Callable, geom: DmaGeometry, budget: OptimizerBudget = OptimizerBudget(),
                levels: Optional[int] = None, return_trace: bool = False):
    """Genetic search over DMA tuning phases (maximization).

    Tournament selection, uniform crossover, per-gene mutation with
    probability ``1/N`` and single-elite survival. With ``levels`` the genes
    are restricted to a uniform phase grid. ``objective`` maps a batch of
    phase vectors ``(B, N)`` to values ``(B,)``.
    """
    rng = np.random.default_rng(budget.seed)
    N = geom.num_elements
    pm = 1.0 / N if budget.mutation is None else budget.mutation

    def draw(shape):
        if levels:
            return -np.pi + 2 * np.pi * rng.integers(0, levels, shape) / levels
        return rng.uniform(-np.pi, np.pi, shape)

    pop = draw((budget.population, N))
    fit = np.asarray(objective(pop), dtype=float)
    b = int(np.argmax(fit))
    best, best_f = pop[b].copy(), float(fit[b])
    trace = [best_f]
    for _ in range(budget.generations):
        idx = rng.integers(0, budget.population, (budget.population, 2, budget.tournament))
        winners = np.take_along_axis(idx, np.argmax(fit[idx], axis=2)[..., None], axis=2)[..., 0]
        pa, pb = pop[winners[:, 0]], pop[winners[:, 1]]
        child = np.where(rng.random(pa.shape) < 0.5, pa, pb)
        mut = rng.random(child.shape) < pm
        child = np.where(mut, draw(child.shape), child)
        child[0] = best
        pop = child
        fit = np.asarray(objective(pop), dtype=float)
        b = int(np.argmax(fit))
        if fit[b] > best_f:
            best, best_f = pop[b].copy(), float(fit[b])
        trace.append(best_f)
    cfg = DmaConfig(best)
    if not np.all((cfg.z >= -np.pi) & (cfg.z < np.pi)):
        raise InfeasibleError("genetic search produced out-of-range phases", "optimizers")
    return (cfg, np.array(trace)) if return_trace else cfg


# ---------------------------------------------------------------------------
# coordinate ascent


def coordinate_ascent(x0, grids: Sequence[np.ndarray], batch_objective: Callable, sweeps: int = 3,
                      tol: float = 0.0):
    """Cyclic coordinate ascent over per-coordinate candidate grids.

    ``batch_objective`` maps ``(B, n)`` candidates to ``(B,)`` values. A move
    is accepted only when it improves the objective by more than ``tol``.
    Returns ``(x, trace)``.
    """
    x = np.array(x0, dtype=float)
    cur = float(batch_objective(x[None, :])[0])
    trace = [cur]
    for _ in range(sweeps):
        moved = False
        for i, g in enumerate(grids):
            g = np.asarray(g, dtype=float)
            X = np.repeat(x[None, :], g.size, axis=0)
            X[:, i] = g
            v = np.asarray(batch_objective(X), dtype=float)
            j = int(np.argmax(v))
            if v[j] > cur + tol:
                x, cur, moved = X[j].copy(), float(v[j]), True
            trace.append(cur)
        if not moved:
            break
    return x, np.array(trace)


def coordinate_ascent_sim(H_RI, transfers: Sequence[np.ndarray], H_IT, objective: Callable, thetas0=None,
                          budget: OptimizerBudget = OptimizerBudget(), grid_points: int = 64, tol: float = 0.0,
                          pass_transfer: bool = False):
    """Per-atom phase sweeps for an ideal SIM.

    The effective channel is linear in each atom's phasor, so all
    ``grid_points`` candidates for one atom are rank-one updates of the
    current channel. ``objective`` maps a batch of effective channels
    ``(B, K, N_R, M)`` to values ``(B,)``. With ``pass_transfer`` it also
    receives the matching ``Psi H_IT`` batch ``(B, N_m, M)``, which radiated
    power normalizations need.

    Returns
    -------
    thetas : ndarray, shape (L, N_m)
    trace : ndarray
        Objective after every coordinate step (nondecreasing).
    """
    H_RI = as_matrix_stack(H_RI, "H_RI")
    H_IT = np.atleast_2d(np.asarray(H_IT, dtype=complex))
    L = len(transfers) + 1
    N = H_IT.shape[0]
    th = np.zeros((L, N)) if thetas0 is None else np.array(thetas0, dtype=float).reshape(L, N)
    grid = 2 * np.pi * np.arange(grid_points) / grid_points
    ph_grid = np.exp(1j * grid)

    def psi(th):
        Psi = np.diag(np.exp(1j * th[0]))
        for W, t in zip(transfers, th[1:]):
            Psi = np.exp(1j * t)[:, None] * (W @ Psi)
        return Psi

    def f(Hc, Ac):
        return objective(Hc, Ac) if pass_transfer else objective(Hc)

    A0 = psi(th) @ H_IT
    cur = float(f((H_RI @ A0)[None], A0[None])[0])
    trace = [cur]
    for _ in range(budget.sweeps):
        moved = False
        for l in range(L):
            # Psi = A_l Theta_l B_l
            A = np.eye(N, dtype=complex)
            for j in range(l + 1, L):
                A = np.exp(1j * th[j])[:, None] * (transfers[j - 1] @ A)
            Bm = np.eye(N, dtype=complex)
            for j in range(l):
                Bm = np.exp(1j * th[j])[:, None] * Bm
                Bm = transfers[j] @ Bm
            U = H_RI @ A                       # (K, N_R, N)
            V = Bm @ H_IT                      # (N, M)
            for n in range(N):
                dph = ph_grid - np.exp(1j * th[l, n])
                H0 = np.einsum("krn,n,nm->krm", U, np.exp(1j * th[l]), V)
                cand = H0[None] + dph[:, None, None, None] * np.einsum("kr,m->krm", U[:, :, n], V[n])[None]
                if pass_transfer:
                    T0 = (A * np.exp(1j * th[l])[None, :]) @ V
                    candA = T0[None] + dph[:, None, None] * np.outer(A[:, n], V[n])[None]
                else:
                    candA = None
                v = np.asarray(f(cand, candA), dtype=float)
                j = int(np.argmax(v))
                if v[j] > cur + tol:
                    th[l, n] = grid[j]
                    cur, moved = float(v[j]), True
                trace.append(cur)
        if not moved:
            break
    return th, np.array(trace)


# ---------------------------------------------------------------------------
# discrete selection


def exhaustive_selection(dictionary: StateDictionary, objective: Callable, cap: int = 100_000):
    """Global maximizer of ``objective(state_tuple)`` over the admissible product space."""
    size = int(np.prod([len(s) for s in dictionary.admissible], dtype=float))
    if size > cap:
        raise InvalidParameterError(
            f"state space has {size} points (> cap {cap}); use greedy_selection instead", "optimizers")
    best, best_v = None, -np.inf
    for st in itertools.product(*[sorted(s) for s in dictionary.admissible]):
        v = float(objective(st))
        if v > best_v:
            best, best_v = st, v
    return SelectionState(best)


def greedy_selection(dictionary: StateDictionary, objective: Callable, sweeps: int = 3, init=None):
    """Per-feed coordinate ascent over states. Returns ``(state, trace)``."""
    st = [min(s) for s in dictionary.admissible] if init is None else list(init)
    cur = float(objective(tuple(st)))
    trace = [cur]
    for _ in range(sweeps):
        moved = False
        for p, adm in enumerate(dictionary.admissible):
            for n in sorted(adm):
                cand = list(st)
                cand[p] = n
                v = float(objective(tuple(cand)))
                if v > cur:
                    st, cur, moved = cand, v, True
            trace.append(cur)
        if not moved:
            break
    return SelectionState(st), np.array(trace)


# ---------------------------------------------------------------------------
# polarization


def pair_grid_search(H_block, grid=None):
    """Maximize ``|p_R^H H p_T|`` jointly over a (theta, psi) grid for a 2x2 block.

    Returns ``(i_R, i_T, value)`` with grid indices.
    """
    th, ps = default_grid() if grid is None else grid
    P = grid_vectors(th, ps)
    V = np.abs(P.conj() @ np.asarray(H_block, dtype=complex) @ P.T)
    iR, iT = np.unravel_index(int(np.argmax(V)), V.shape)
    return int(iR), int(iT), float(V[iR, iT])


def polarization_grid_search(H_up, rx_states: Sequence[PolarizationState], P_total: float, noise: float = 1.0,
                             grid=None, gamma: float = 1.0, sweeps: int = 2, init=None):
    """One-sided transmit polarization search maximizing waterfilled SE.

    Antennas are updated cyclically; for each antenna every (theta, psi) grid
    point is scored with a batched SVD and waterfilling.

    Returns ``(tx_states, se, trace)``.
    """
    from .polarization import build_precoder

    H = as_matrix_stack(H_up, "H_up")
    K = H.shape[0]
    NT = H.shape[2] // 2
    th, ps = default_grid() if grid is None else grid
    P = grid_vectors(th, ps, gamma)                         # (G, 2)
    W = build_precoder(rx_states)
    Hw = np.einsum("rs,ksc->krc", W.conj().T, H)            # (K, N_R, 2 N_T)
    if init is None:
        idx = np.zeros(NT, dtype=int)
        # start from vertical where it lies on the grid
        v = np.argmin(np.abs(th - np.pi / 2) + np.abs(ps))
        idx[:] = v
    else:
        idx = np.asarray(init, dtype=int).copy()

    def heff(idx):
        return np.stack([Hw[:, :, 2 * n:2 * n + 2] @ P[idx[n]] for n in range(NT)], axis=-1)

    w = np.full((1, NT), gamma)
    cur = float(waterfill_se_batch(heff(idx)[None], P_total, noise, w)[0])
    trace = [cur]
    for _ in range(sweeps):
        moved = False
        for n in range(NT):
            base = heff(idx)
            cols = np.einsum("krc,gc->gkr", Hw[:, :, 2 * n:2 * n + 2], P)
            cand = np.repeat(base[None], P.shape[0], axis=0)
            cand[..., n] = cols
            v = waterfill_se_batch(cand, P_total, noise, np.repeat(w, P.shape[0], axis=0))
            j = int(np.argmax(v))
            if v[j] > cur:
                idx[n], cur, moved = j, float(v[j]), True
            trace.append(cur)
        if not moved:
            break
    states = [PolarizationState(float(th[i]), float(ps[i]), gamma) for i in idx]
    return states, cur, np.array(trace)


# ---------------------------------------------------------------------------
# pinching antennas


def pass_phase_alignment(layout, h_target, guide: int = 0):
    """Shift pinches of one guide so their contributions add in phase at a target.

    ``h_target`` holds the channel coefficient from each pinch of the guide
    to the target. Each pinch moves by less than one guided wavelength; the
    nominal spacing must exceed a guided wavelength so ordering is kept.
    Returns the new layout.
    """
    x = np.array(layout.positions[guide], dtype=float)
    h = np.asarray(h_target, dtype=complex).ravel()
    if h.size != x.size:
        raise DimensionError("one target coefficient per pinch", "optimizers")
    bg = layout.beta_g
    lam_g = 2 * np.pi / bg
    if x.size > 1 and np.min(np.diff(x)) <= lam_g:
        raise InfeasibleError("pinch spacing must exceed one guided wavelength for phase alignment",
                              "optimizers")
    # want arg(h_m) - bg x_m equal for all m
    ref = np.angle(h[0]) - bg * x[0]
    shift = np.mod(np.angle(h) - bg * x - ref, 2 * np.pi) / bg
    shift[0] = 0.0
    shift = np.where(shift > lam_g / 2, shift - lam_g, shift)
    new = list(layout.positions)
    new[guide] = x + shift
    out = layout.with_positions(new)
    return out


# ---------------------------------------------------------------------------
# generic front-end search and matching


def coordinate_search(front_end: FrontEnd, objective: Callable, sweeps: int = 1, minimize: bool = False):
    """Cyclic search over ``front_end.parameter_grid()``.

    ``objective(front_end)`` is evaluated for every candidate. Returns
    ``(front_end, trace)``.
    """
    sgn = -1.0 if minimize else 1.0
    fe = front_end
    x = np.array(fe.parameters())
    grids = fe.parameter_grid()
    cur = sgn * float(objective(fe))
    trace = [sgn * cur]
    for _ in range(sweeps):
        moved = False
        for i, g in enumerate(grids):
            for c in g:
                if c == x[i]:
                    continue
                y = x.copy()
                y[i] = c
                cand = fe.with_parameters(y)
                if not cand.is_feasible():
                    continue
                v = sgn * float(objective(cand))
                if v > cur:
                    fe, x, cur, moved = cand, y, v, True
            trace.append(sgn * cur)
        if not moved:
            break
    if not fe.is_feasible():
        raise InfeasibleError("coordinate search left the feasible set", "optimizers")
    return fe, np.array(trace)


def _project_unit_modulus(X):
    X = np.asarray(X, dtype=complex)
    ph = np.angle(X)
    return np.exp(1j * ph)


def _ls_digital(Fo, A):
    return np.stack([np.linalg.lstsq(A[k], Fo[k], rcond=None)[0] for k in range(Fo.shape[0])])


def _matching(Fo, Fra, Fa, Fd):
    return float(np.sum(np.abs(Fo - Fra @ Fa[None] @ Fd) ** 2))


def _hybrid_step(Fo, Fra, Fa, Fd, obj):
    # analog: projected gradient with backtracking; accepted only if it helps
    R = Fo - Fra @ Fa[None] @ Fd
    grad = -np.sum(Fra.conj().transpose(0, 2, 1) @ R @ Fd.conj().transpose(0, 2, 1), axis=0)
    mu = 1.0 / max(np.linalg.norm(Fra, axis=(1, 2)).max() ** 2 * np.linalg.norm(Fd, axis=(1, 2)).max() ** 2,
                   1e-30)
    for _ in range(30):
        cand = _project_unit_modulus(Fa - mu * grad)
        Fd_c = _ls_digital(Fo, Fra @ cand[None])
        v = _matching(Fo, Fra, cand, Fd_c)
        if v < obj:
            return cand, Fd_c, v
        mu *= 0.5
    Fd_c = _ls_digital(Fo, Fra @ Fa[None])
    v = _matching(Fo, Fra, Fa, Fd_c)
    if v < obj:
        return Fa, Fd_c, v
    return Fa, Fd, obj


def two_stage_matching(F_opt, F_ra, N_rf: int, max_iter: int = 20, seed: int = 0, F_ana0=None, tol: float = 1e-12):
    """Unit-modulus analog plus least-squares digital factorization of ``F_opt``.

    Minimizes ``sum_k ||F_opt,k - F_ra,k F_ana F_dig,k||_F^2`` with a
    frequency-flat analog precoder. Returns ``(F_ana, F_dig, trace)``.
    """
    Fo = as_matrix_stack(F_opt, "F_opt")
    Fra = as_matrix_stack(F_ra, "F_ra")
    if Fra.shape[0] == 1 and Fo.shape[0] > 1:
        Fra = np.broadcast_to(Fra, (Fo.shape[0],) + Fra.shape[1:])
    if Fra.shape[1] != Fo.shape[1]:
        raise DimensionError("F_ra rows must equal F_opt rows", "optimizers")
    n_in = Fra.shape[2]
    if F_ana0 is None:
        rng = np.random.default_rng(seed)
        Fa = np.exp(2j * np.pi * rng.random((n_in, N_rf)))
    else:
        Fa = _project_unit_modulus(F_ana0)
    Fd = _ls_digital(Fo, Fra @ Fa[None])
    obj = _matching(Fo, Fra, Fa, Fd)
    trace = [obj]
    for _ in range(max_iter):
        Fa, Fd, new = _hybrid_step(Fo, Fra, Fa, Fd, obj)
        trace.append(new)
        if obj - new <= tol * max(obj, 1e-300):
            obj = new
            break
        obj = new
    return Fa, Fd, np.array(trace)


def alternating_trihybrid(front_end: FrontEnd, F_opt, N_rf: int, budget: OptimizerBudget = OptimizerBudget(),
                          P_total: Optional[float] = None, freeze_ra: bool = False, inner_iter: int = 5):
    """Block-coordinate matching over ``(F_ra, F_ana, F_dig)``.

    Each outer iteration runs one sweep of the front end's parameter search,
    then ``inner_iter`` analog/digital steps. Every block update is
    accept-if-better, so the matching trace is nonincreasing. The returned
    digital precoder is finally scaled to ``P_total`` radiated power when
    given (the trace is recorded before that scaling).

    Returns ``(front_end, PrecoderSet, trace)``.
    """
    Fo = as_matrix_stack(F_opt, "F_opt")
    K = Fo.shape[0]
    fe = front_end

    def fra(fe):
        return np.stack([fe.precoder(k) for k in range(K)])

    rng = np.random.default_rng(budget.seed)
    Fa = np.exp(2j * np.pi * rng.random((fra(fe).shape[2], N_rf)))
    Fd = _ls_digital(Fo, fra(fe) @ Fa[None])
    obj = _matching(Fo, fra(fe), Fa, Fd)
    trace = [obj]
    for _ in range(budget.max_iter):
        start = obj
        if not freeze_ra:
            def cost(c):
                A = fra(c) @ Fa[None]
                return _matching(Fo, fra(c), Fa, _ls_digital(Fo, A))

            cand, _ = coordinate_search(fe, cost, sweeps=1, minimize=True)
            v = cost(cand)
            if v < obj:
                fe = cand
                Fd = _ls_digital(Fo, fra(fe) @ Fa[None])
                obj = _matching(Fo, fra(fe), Fa, Fd)
            trace.append(obj)
        for _ in range(inner_iter):
            Fa, Fd, obj = _hybrid_step(Fo, fra(fe), Fa, Fd, obj)
            trace.append(obj)
        if start - obj <= budget.tol * max(start, 1e-300):
            break
    if not fe.is_feasible():
        raise InfeasibleError("alternating optimization produced an infeasible configuration", "optimizers")
    if P_total is not None:
        P = sum(fe.radiated_power(k, Fa, Fd[k]) for k in range(K))
        if P <= 0:
            raise SingularConfigurationError("optimized precoder radiates no power", "optimizers")
        Fd = Fd * np.sqrt(P_total / P)
    return fe, PrecoderSet(Fd, np.broadcast_to(Fa, (K,) + Fa.shape), fe), np.array(trace)
