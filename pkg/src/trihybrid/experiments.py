"""Monte Carlo scenario runners for each front-end architecture.

A runner receives the merged architecture parameters, the list of sweep
points of one scenario and a ``SeedSequence`` for one realization. It returns
one row per sweep point. The first spawned child seeds quantities shared by
all points of the realization (channels, user drops); the remaining children
seed per-point randomness such as the genetic search.
"""

from __future__ import annotations

import itertools
from typing import Callable, Dict, List, Mapping

import numpy as np

from . import optimizers as opt
from .core import ArrayDescriptor
from .dma import DmaGeometry, calibrate_coupling
from .exceptions import InvalidParameterError
from .parasitic import ParasiticFrontEnd, synthesize_impedance_set
from .pinching import (
    WaveguideLayout,
    equal_power_deltas,
    guide_efficiency,
    pinch_weights,
    proportional_deltas,
)
from .polarization import VERTICAL, build_precoder, default_grid, generate_unpolarized_channel
from .ref_metric import PowerConsumptionModel, power_consumption
from .sim_stack import SimGeometry, direct_response, feed_channel, rs_propagation
from .wire import (
    WireGeometry,
    count_nulls,
    excitation_vector,
    impedance_matrix,
    null_location,
    port_loads,
    radiated_power as wire_radiated_power,
    snr_field_map,
    wire_precoder,
)

__all__ = ["ARCHITECTURES", "DEFAULTS", "AXES", "expand_sweep", "run_realization", "power_model"]

C0 = 299_792_458.0


def expand_sweep(sweep: Mapping[str, list]) -> List[Dict]:
    """Cartesian product of the sweep axes in declaration order."""
    if not sweep:
        return [{}]
    names = list(sweep)
    return [dict(zip(names, vals)) for vals in itertools.product(*[list(sweep[n]) for n in names])]


def power_model(params: Mapping) -> PowerConsumptionModel:
    kw = dict(params.get("power_model", {}) or {})
    return PowerConsumptionModel(**kw)


def _noise(params) -> float:
    return float(params["power_w"]) / 10 ** (float(params["snr_db"]) / 10)


def _row(se, p_rad, p_cons, **extras):
    return {"se_bits_per_hz": float(se), "p_radiated_w": float(p_rad), "p_consumed_w": float(p_cons),
            "extras": {k: float(v) for k, v in extras.items()}}


# ---------------------------------------------------------------------------
# DMA: realized gain toward a steering direction vs. power consumption


def run_dma(params, points, ss):
    children = ss.spawn(len(points))
    lam = 1.0
    model = power_model(params)
    out = []
    for pt, child in zip(points, children):
        nx, ny = int(pt.get("n_x", params["n_x"])), int(pt.get("n_y", params["n_y"]))
        nu = calibrate_coupling(nx, params["target_residual"], params["coupling_floor"])
        geom = DmaGeometry.uniform(nx, 1, ny, lam, nu=nu)
        f = opt.dma_gain_objective(geom, 2 * np.pi / lam, tuple(params["steer"]))
        seed = int(child.generate_state(1)[0])
        budget = opt.OptimizerBudget(population=params["population"], generations=params["generations"], seed=seed)
        cfg = opt.genetic_dma(f, geom, budget)
        g = float(f(cfg.z[None, :])[0])
        bits = int(pt.get("dac_bits", params["dac_bits"]))
        p_cons = power_consumption(model, ny, bits, nx * ny)
        se = np.log2(1.0 + 10 ** (params["snr_db"] / 10) * g)
        out.append(_row(se, params["power_w"], p_cons, realized_gain=g, coupling=nu))
    return out


# ---------------------------------------------------------------------------
# SIM: layers x DAC bits with quantized zero forcing


def _zf_objective(noise, power):
    def f(H, A):
        Hb = H[:, 0]
        W = np.einsum("bnm,bnq->bmq", A.conj(), A)
        try:
            F = np.linalg.inv(Hb)
        except np.linalg.LinAlgError:
            F = np.linalg.pinv(Hb)
        P = np.real(np.einsum("bji,bjk,bki->b", F.conj(), W, F))
        F = F * np.sqrt(power / np.where(P > 0, P, np.inf))[:, None, None]
        G = np.abs(Hb @ F) ** 2
        s = np.diagonal(G, axis1=1, axis2=2)
        r = np.sum(np.log2(1.0 + s / (G.sum(axis=2) - s + noise)), axis=1)
        return np.where(np.isfinite(r), r, 0.0)

    return f


def run_sim(params, points, ss):
    shared = ss.spawn(1)[0]
    rng = np.random.default_rng(shared)
    lam = 1.0
    geom = SimGeometry(int(params["n_side"]), params["pitch"] * lam, params["layer_spacing"] * lam, lam)
    _, W = rs_propagation(geom)
    M, U = int(params["antennas"]), int(params["users"])
    H_IT = feed_channel(geom, M)
    N = geom.num_atoms
    H_RI = (rng.standard_normal((U, N)) + 1j * rng.standard_normal((U, N))) / np.sqrt(2)
    noise, P = _noise(params), float(params["power_w"])
    obj = _zf_objective(noise, P)
    model = power_model(params)
    budget = opt.OptimizerBudget(sweeps=int(params["sweeps"]))
    transfers_cache = {}
    for L in sorted({int(pt.get("layers", params["layers"])) for pt in points}):
        if L == 0:
            A = H_IT.astype(complex)
        else:
            th, _ = opt.coordinate_ascent_sim(H_RI[None], [W] * (L - 1), H_IT, obj, budget=budget,
                                              grid_points=int(params["grid_points"]), pass_transfer=True)
            A = direct_response(th, [W] * (L - 1)) @ H_IT
        transfers_cache[L] = A
    out = []
    for pt in points:
        L = int(pt.get("layers", params["layers"]))
        b = pt.get("dac_bits", params["dac_bits"])
        b = None if b is None else int(b)
        A = transfers_cache[L]
        H = H_RI @ A
        se = opt.zf_sum_rate_batch(H[None], b, P, noise, weight=A.conj().T @ A)[0]
        p_cons = power_consumption(model, M, b, L * N)
        out.append(_row(se, P, p_cons, sum_rate_unquantized=obj(H[None, None], A[None])[0]))
    return out


# ---------------------------------------------------------------------------
# polarization: static, dual-polarized and reconfigurable transmitters


def run_polarization(params, points, ss):
    shared = ss.spawn(1)[0]
    rng = np.random.default_rng(shared)
    nt, nr = int(params["n_t"]), int(params["n_r"])
    tx = ArrayDescriptor.uniform_linear(nt, 1.0)
    rx = ArrayDescriptor.uniform_linear(nr, 1.0)
    H = generate_unpolarized_channel(rng, tx, rx, num_paths=int(params["num_paths"]),
                                     num_subcarriers=int(params["subcarriers"]), xpd_db=float(params["xpd_db"]))
    H = H.matrices
    P, noise = float(params["power_w"]), _noise(params)
    rx_states = [VERTICAL] * nr
    Wr = build_precoder(rx_states)
    Hw = np.einsum("rs,ksc->krc", Wr.conj().T, H)
    cache = {}

    def se_of(variant):
        if variant not in cache:
            if variant == "static":
                cache[variant] = opt.waterfill_se_batch((Hw @ build_precoder([VERTICAL] * nt))[None], P, noise)[0]
            elif variant == "dual":
                cache[variant] = opt.waterfill_se_batch(Hw[None], P, noise)[0]
            elif variant == "reconfig":
                g = default_grid(int(params["grid"]), int(params["grid"]))
                cache[variant] = opt.polarization_grid_search(H, rx_states, P, noise, grid=g,
                                                              sweeps=int(params["sweeps"]))[1]
            else:
                raise InvalidParameterError(f"unknown polarization variant {variant!r}", "experiments")
        return cache[variant]

    model = power_model(params)
    out = []
    for pt in points:
        v = pt.get("variant", params["variant"])
        chi = float(pt.get("chi", params["chi"]))
        p_cons = power_consumption(model, nt, variant=v, chi=chi if v == "reconfig" else 0.0)
        out.append(_row(se_of(v), P, p_cons, chi=chi))
    return out


# ---------------------------------------------------------------------------
# non-radiating wire: field-map nulls vs. termination


def run_wire(params, points, ss):
    model = power_model(params)
    out = []
    z_grid = np.linspace(*params["z_range"], int(params["z_points"]))
    r_grid = np.asarray(params["r_values"], dtype=float)
    for pt in points:
        excited = tuple(int(i) for i in pt.get("excited", params["excited"]))
        geom = WireGeometry(params["radius"], params["spacing"], 1.0, int(params["num_ports"]), excited,
                            float(pt.get("z_load", params["z_load"])))
        Z = impedance_matrix(geom)
        snr = snr_field_map(geom, z_grid, r_grid, params["noise_variance"], Z_ra=Z)
        F = wire_precoder(Z, port_loads(geom))
        v = excitation_vector(geom)
        p_rad = wire_radiated_power(Z, F, v[:, None])
        se = float(np.mean(np.log2(1.0 + snr)))
        p_cons = power_consumption(model, len(excited))
        out.append(_row(se, p_rad, p_cons, null_count=count_nulls(snr, params["null_threshold_db"]),
                        null_index=null_location(snr)))
    return out


# ---------------------------------------------------------------------------
# pinching antennas: one guide serving one user


def run_pass(params, points, ss):
    shared = ss.spawn(1)[0]
    rng = np.random.default_rng(shared)
    fc = float(params["carrier_hz"])
    lam = C0 / fc
    beta_g = 2 * np.pi * float(params["n_eff"]) / lam
    length = float(params["guide_length"])
    user = np.array([rng.uniform(0, length), rng.uniform(-params["side"] / 2, params["side"] / 2)])
    h_guide = float(params["height"])
    P, noise = float(params["power_w"]), _noise(params)
    model = power_model(params)
    out = []
    for pt in points:
        M = int(pt.get("num_pinches", params["num_pinches"]))
        alpha = float(pt.get("alpha", params["alpha"]))
        mode = pt.get("coupling", params["coupling"])
        if mode == "equal":
            deltas = equal_power_deltas(M, alpha)
        elif mode == "proportional":
            deltas = proportional_deltas(M, alpha)
        else:
            raise InvalidParameterError(f"unknown coupling model {mode!r}", "experiments")
        x = (np.arange(M) + 0.5) * length / M
        layout = WaveguideLayout((x,), (deltas,), beta_g)
        d = np.sqrt((x - user[0]) ** 2 + user[1] ** 2 + h_guide ** 2)
        h = lam / (4 * np.pi * d) * np.exp(-2j * np.pi * d / lam)
        if params["align"] and M > 1 and length / M > 2 * np.pi / beta_g:
            layout = opt.pass_phase_alignment(layout, h)
            xa = layout.positions[0]
            d = np.sqrt((xa - user[0]) ** 2 + user[1] ** 2 + h_guide ** 2)
            h = lam / (4 * np.pi * d) * np.exp(-2j * np.pi * d / lam)
        g = np.abs(h @ pinch_weights(layout, 0)) ** 2
        eta = guide_efficiency(deltas)
        se = np.log2(1.0 + P * g / noise)
        out.append(_row(se, P * eta, power_consumption(model, 1), efficiency=eta, gain=g))
    return out


# ---------------------------------------------------------------------------
# parasitic arrays: load optimization vs. number of parasitic elements


def run_parasitic(params, points, ss):
    shared = ss.spawn(1)[0]
    seed = int(shared.generate_state(1)[0])
    P, noise = float(params["power_w"]), _noise(params)
    model = power_model(params)
    na, nr = int(params["n_a"]), int(params["n_r"])
    out = []
    for pt in points:
        npar = int(pt.get("n_p", params["n_p"]))
        imp = synthesize_impedance_set(np.random.default_rng(seed), na, npar, nr, int(params["subcarriers"]))
        fe = ParasiticFrontEnd(imp, np.zeros(npar), params["load_resistance"], tuple(params["x_range"]),
                               int(params["grid_points"]))

        def se_of(f):
            H = np.stack([f.effective_channel(k) for k in range(f.num_subcarriers)])
            W = np.stack([f.power_weight(k) for k in range(f.num_subcarriers)])
            return opt.waterfill_precoder(H, P, noise, weight=W)[1]

        if npar:
            fe, _ = opt.coordinate_search(fe, se_of, sweeps=int(params["sweeps"]))
        se = se_of(fe)
        out.append(_row(se, P, power_consumption(model, na), area=(na + npar) * params["cell_area"]))
    return out


# ---------------------------------------------------------------------------
# tabulated designs (no simulation)


def run_table(params, points, ss):
    designs = {d["name"]: d["metrics"] for d in params["designs"]}
    out = []
    for pt in points:
        name = pt.get("design")
        if name not in designs:
            raise InvalidParameterError(f"unknown design {name!r}", "experiments")
        m = dict(designs[name])
        out.append(_row(m.pop("se", np.nan), m.pop("p_radiated", np.nan), m.pop("p_consumed", np.nan), **m))
    return out


ARCHITECTURES: Dict[str, Callable] = {
    "dma": run_dma,
    "sim": run_sim,
    "polarization": run_polarization,
    "wire": run_wire,
    "pass": run_pass,
    "parasitic": run_parasitic,
    "table": run_table,
}

_COMMON = {"power_w": 1.0, "snr_db": 10.0, "power_model": {}}

DEFAULTS: Dict[str, Dict] = {
    "dma": {**_COMMON, "n_x": 8, "n_y": 2, "dac_bits": 1, "target_residual": 0.1, "coupling_floor": 0.2,
            "steer": [0.0, 0.0], "population": 32, "generations": 100},
    "sim": {**_COMMON, "n_side": 4, "pitch": 0.5, "layer_spacing": 0.5, "antennas": 4, "users": 4,
            "layers": 0, "dac_bits": 1, "sweeps": 2, "grid_points": 64},
    "polarization": {**_COMMON, "snr_db": 0.0, "n_t": 4, "n_r": 2, "subcarriers": 16, "num_paths": 6,
                     "xpd_db": 6.0, "grid": 32, "sweeps": 2, "variant": "static", "chi": 0.0},
    "wire": {**_COMMON, "radius": 0.01, "spacing": 0.5, "num_ports": 8, "excited": [0, 7], "z_load": 377.0,
             "z_range": [-1.75, 1.75], "z_points": 71, "r_values": [0.1, 0.25, 0.5], "noise_variance": 1e-10,
             "null_threshold_db": -10.0},
    "pass": {**_COMMON, "carrier_hz": 28e9, "n_eff": 1.4, "guide_length": 1.0, "side": 1.0, "height": 0.5,
             "num_pinches": 4, "alpha": 0.4, "coupling": "equal", "align": True, "snr_db": 90.0},
    "parasitic": {**_COMMON, "n_a": 4, "n_r": 2, "n_p": 8, "subcarriers": 1, "load_resistance": 1.0,
                  "x_range": [-200.0, 200.0], "grid_points": 21, "sweeps": 1, "cell_area": 1.0},
    "table": {"designs": []},
}

# sweepable axes per architecture
AXES: Dict[str, tuple] = {
    "dma": ("n_x", "n_y", "dac_bits"),
    "sim": ("layers", "dac_bits"),
    "polarization": ("variant", "chi"),
    "wire": ("z_load", "excited"),
    "pass": ("num_pinches", "alpha", "coupling"),
    "parasitic": ("n_p",),
    "table": ("design",),
}


def run_realization(architecture: str, params: Mapping, points: List[Dict], ss: np.random.SeedSequence):
    """Evaluate all sweep points for one realization."""
    if not points:
        return []
    return ARCHITECTURES[architecture](params, points, ss)
