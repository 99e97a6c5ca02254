"""Command line entry point: ``trihybrid run | validate | ref``.

Scenario files are YAML mappings::

    scenario_id: sim_layers_bits
    architecture: sim            # dma | sim | polarization | wire | pass | parasitic | table
    seed: 7
    realizations: 20
    params: {snr_db: 10}         # overrides of the architecture defaults
    sweep: {layers: [0, 1, 2], dac_bits: [1, 4]}
    ref:                         # optional REF table in the summary
      baseline: {layers: 0, dac_bits: 1}
      benefits: {se_bits_per_hz: 0.5}
      costs: {p_consumed_w: 0.5}
    outputs: {results: results.csv, summary: summary.json}
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import copy
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import sys
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy
import yaml

from . import __version__, kernels
from .exceptions import ModelError, ScenarioError, SpecificationError
from .experiments import ARCHITECTURES, AXES, DEFAULTS, expand_sweep, run_realization
from .pinching import equal_power_feasible
from .ref_metric import (
    DesignPoint,
    Metric,
    PowerConsumptionModel,
    RefSpec,
    design_deltas,
    ref,
    to_db,
    write_report,
)

log = logging.getLogger("trihybrid")

BASE_COLUMNS = ["se_bits_per_hz", "p_radiated_w", "p_consumed_w"]
TOP_KEYS = {"scenario_id", "architecture", "seed", "realizations", "params", "sweep", "ref", "outputs"}


# ---------------------------------------------------------------------------
# YAML loading with line numbers


def _plain(node):
    """Convert a composed YAML node to Python data and collect key line numbers."""
    lines: Dict[str, int] = {}

    def walk(n, path):
        lines[path] = n.start_mark.line + 1
        if isinstance(n, yaml.MappingNode):
            out = {}
            for k, v in n.value:
                key = yaml.safe_load(yaml.serialize(k)) if not isinstance(k, yaml.ScalarNode) else k.value
                sub = f"{path}.{key}" if path else str(key)
                lines[sub] = k.start_mark.line + 1
                out[key] = walk(v, sub)
                lines[sub] = k.start_mark.line + 1
            return out
        if isinstance(n, yaml.SequenceNode):
            return [walk(v, f"{path}[{i}]") for i, v in enumerate(n.value)]
        return yaml.safe_load(yaml.serialize(n))

    return walk(node, ""), lines


def load_scenario_text(text: str) -> Tuple[Dict, Dict[str, int]]:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", None,
                            None if mark is None else mark.line + 1) from None
    if node is None:
        raise ScenarioError("scenario file is empty", None, 1)
    if not isinstance(node, yaml.MappingNode):
        raise ScenarioError("scenario must be a mapping", None, node.start_mark.line + 1)
    return _plain(node)


def load_scenario(path: str) -> Tuple[Dict, Dict[str, int], str]:
    with open(path, "rb") as fh:
        raw = fh.read()
    data, lines = load_scenario_text(raw.decode("utf-8"))
    return data, lines, hashlib.sha256(raw).hexdigest()


# ---------------------------------------------------------------------------
# validation


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate(data: Dict, lines: Dict[str, int]) -> List[ScenarioError]:
    """Schema and cross-reference checks; returns all diagnostics found."""
    errs: List[ScenarioError] = []

    def err(msg, field):
        errs.append(ScenarioError(msg, field, lines.get(field, lines.get(field.split(".")[0]))))

    for k in data:
        if k not in TOP_KEYS:
            err(f"unknown key; expected one of {sorted(TOP_KEYS)}", str(k))
    if not isinstance(data.get("scenario_id"), str) or not data.get("scenario_id"):
        err("scenario_id must be a nonempty string", "scenario_id")
    arch = data.get("architecture")
    if arch not in ARCHITECTURES:
        err(f"unknown architecture {arch!r}; choose from {sorted(ARCHITECTURES)}", "architecture")
        return errs
    R = data.get("realizations", 1)
    if not _is_int(R) or R < 1:
        err("realizations must be an integer >= 1", "realizations")
    seed = data.get("seed", 0)
    if not _is_int(seed) or seed < 0:
        err("seed must be a non-negative integer", "seed")

    params = data.get("params", {}) or {}
    if not isinstance(params, dict):
        err("params must be a mapping", "params")
        params = {}
    for k in params:
        if k not in DEFAULTS[arch]:
            err(f"unknown parameter for {arch}; expected one of {sorted(DEFAULTS[arch])}", f"params.{k}")
    pm = params.get("power_model", {}) or {}
    if isinstance(pm, dict):
        names = {f.name for f in dataclasses.fields(PowerConsumptionModel)}
        for k in pm:
            if k not in names:
                err(f"unknown power-model field; expected one of {sorted(names)}", f"params.power_model.{k}")
        if all(k in names for k in pm):
            try:
                PowerConsumptionModel(**pm)
            except (ModelError, TypeError) as exc:
                err(str(exc), "params.power_model")

    sweep = data.get("sweep", {}) or {}
    if not isinstance(sweep, dict):
        err("sweep must be a mapping of axis -> list", "sweep")
        sweep = {}
    for k, v in sweep.items():
        if k not in AXES[arch]:
            err(f"axis not sweepable for {arch}; expected one of {list(AXES[arch])}", f"sweep.{k}")
        if not isinstance(v, list):
            err("sweep values must be a list", f"sweep.{k}")

    merged = {**DEFAULTS[arch], **params}
    if arch == "pass":
        Ms = sweep.get("num_pinches", [merged.get("num_pinches")])
        As = sweep.get("alpha", [merged.get("alpha")])
        modes = sweep.get("coupling", [merged.get("coupling")])
        if "equal" in (modes if isinstance(modes, list) else []):
            for M in Ms if isinstance(Ms, list) else []:
                for a in As if isinstance(As, list) else []:
                    if _is_int(M) and _is_num(a) and not equal_power_feasible(M, a):
                        fld = "sweep.alpha" if "alpha" in sweep else "params.alpha"
                        err(f"infeasible equal-power design: alpha^2 M = {a * a * M:.4g} > 1 "
                            f"(alpha={a}, M={M})", fld)
    if arch == "table":
        names = [d.get("name") for d in merged.get("designs", []) if isinstance(d, dict)]
        for d in sweep.get("design", []) if isinstance(sweep.get("design", []), list) else []:
            if d not in names:
                err(f"design {d!r} is not defined in params.designs", "sweep.design")

    rf = data.get("ref")
    if rf is not None:
        if not isinstance(rf, dict):
            err("ref must be a mapping", "ref")
        else:
            base = rf.get("baseline", {}) or {}
            if not isinstance(base, dict):
                err("baseline must be a mapping of axis -> value", "ref.baseline")
            else:
                for k, v in base.items():
                    if k not in sweep:
                        err("baseline axis is not swept", f"ref.baseline.{k}")
                    elif isinstance(sweep[k], list) and v not in sweep[k]:
                        err(f"baseline value {v!r} not among the sweep values", f"ref.baseline.{k}")
            try:
                RefSpec(rf.get("benefits", {}) or {}, rf.get("costs", {}) or {},
                        tuple(rf.get("constraints", ()) or ()), float(rf.get("epsilon", 1e-3)))
            except (SpecificationError, TypeError, ValueError) as exc:
                err(str(exc), "ref")
    outs = data.get("outputs", {}) or {}
    if not isinstance(outs, dict) or any(k not in ("results", "summary") for k in outs):
        err("outputs may only contain 'results' and 'summary'", "outputs")
    return errs


# ---------------------------------------------------------------------------
# running


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (list, tuple)):
        return "|".join(_fmt(v) for v in x)
    return str(x)


def _work(args):
    arch, params, points, seed, r = args
    ss = np.random.SeedSequence(seed, spawn_key=(r,))
    return run_realization(arch, params, points, ss)


def _provenance(scenario_id, digest, seed, arch) -> List[str]:
    return [
        f"# scenario_id={scenario_id}",
        f"# scenario_sha256={digest}",
        f"# seed={seed}",
        f"# architecture={arch}",
        f"# versions=trihybrid {__version__}; numpy {np.__version__}; scipy {scipy.__version__}; "
        f"yaml {yaml.__version__}; kernels {kernels.BACKEND}",
    ]


def _stats(rows, points, cols):
    out = []
    for i, pt in enumerate(points):
        entry = {"point": pt, "n": 0, "mean": {}, "stderr": {}}
        sub = [r for r in rows if r["_point"] == i]
        entry["n"] = len(sub)
        for c in cols:
            v = np.array([r[c] for r in sub], dtype=float)
            ok = v[np.isfinite(v)]
            entry["mean"][c] = float(ok.mean()) if ok.size else None
            entry["stderr"][c] = float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else None
        out.append(entry)
    return out


def _ref_table(stats, rf: Dict):
    spec = RefSpec(rf.get("benefits", {}), rf.get("costs", {}), tuple(rf.get("constraints", ()) or ()),
                   float(rf.get("epsilon", 1e-3)))
    base = rf.get("baseline", {}) or {}
    idx = [i for i, s in enumerate(stats) if all(s["point"].get(k) == v for k, v in base.items())]
    if len(idx) != 1:
        raise ScenarioError("REF baseline must select exactly one sweep point", "ref.baseline")
    names = list(spec.benefits) + list(spec.costs)
    b = stats[idx[0]]
    bp = DesignPoint("baseline", {k: Metric(b["mean"][k]) for k in names})
    table = []
    for s in stats:
        if s is b:
            continue
        dp = DesignPoint("design", {k: Metric(s["mean"][k]) for k in names})
        res = ref(spec, design_deltas(dp, bp, names))
        table.append({"point": s["point"], "deltas": res.deltas, "ref_linear": res.value,
                      "ref_db": res.value_db, "cost_neutral": res.cost_neutral, "regularized": res.regularized})
    return table


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def run_scenario(path: str, out_dir: str = ".", seed: Optional[int] = None, jobs: int = 1,
                 fmt: str = "csv") -> Dict[str, str]:
    """Execute a scenario and write results plus summary. Returns the written paths."""
    data, lines, digest = load_scenario(path)
    errs = validate(data, lines)
    if errs:
        raise errs[0]
    arch = data["architecture"]
    sid = data["scenario_id"]
    seed = int(data.get("seed", 0) if seed is None else seed)
    R = int(data.get("realizations", 1))
    params = copy.deepcopy({**DEFAULTS[arch], **(data.get("params") or {})})
    sweep = data.get("sweep") or {}
    points = expand_sweep(sweep)
    if any(len(v) == 0 for v in sweep.values()):
        points = []
    axes = list(sweep)

    tasks = [(arch, params, points, seed, r) for r in range(R)]
    if jobs > 1 and R > 1 and points:
        with cf.ProcessPoolExecutor(max_workers=jobs) as ex:
            per_real = list(ex.map(_work, tasks))
    else:
        per_real = [_work(t) for t in tasks]

    extras = sorted({k for rows in per_real for row in rows for k in row["extras"]})
    cols = ["scenario_id"] + axes + ["realization"] + BASE_COLUMNS + extras
    flat = []
    for r, rows in enumerate(per_real):
        for i, row in enumerate(rows):
            rec = {"scenario_id": sid, "realization": r, "_point": i, **points[i],
                   **{c: row[c] for c in BASE_COLUMNS}, **{e: row["extras"].get(e, math.nan) for e in extras}}
            flat.append(rec)
    # rows ordered by sweep point, then realization
    flat.sort(key=lambda x: (x["_point"], x["realization"]))

    os.makedirs(out_dir, exist_ok=True)
    outs = data.get("outputs") or {}
    ext = "json" if fmt == "json" else "csv"
    res_path = os.path.join(out_dir, outs.get("results", f"{sid}_results.{ext}"))
    sum_path = os.path.join(out_dir, outs.get("summary", f"{sid}_summary.json"))
    prov = _provenance(sid, digest, seed, arch)
    if fmt == "json":
        body = {"provenance": [p[2:] for p in prov], "columns": cols,
                "rows": [{c: r[c] for c in cols} for r in flat]}
        with open(res_path, "w") as fh:
            json.dump(_clean(body), fh, indent=1, sort_keys=False, default=_json_default)
            fh.write("\n")
    else:
        buf = io.StringIO()
        buf.write("\n".join(prov) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in flat:
            w.writerow([_fmt(r[c]) for c in cols])
        with open(res_path, "w", newline="") as fh:
            fh.write(buf.getvalue())

    stats = _stats(flat, points, BASE_COLUMNS + extras)
    summary = {"scenario_id": sid, "architecture": arch, "seed": seed, "realizations": R,
               "scenario_sha256": digest, "axes": axes, "points": stats}
    if data.get("ref") and points:
        summary["ref"] = _ref_table(stats, data["ref"])
    with open(sum_path, "w") as fh:
        json.dump(_clean(summary), fh, indent=1, default=_json_default)
        fh.write("\n")
    return {"results": res_path, "summary": sum_path}


# ---------------------------------------------------------------------------
# standalone REF from a metrics file


def ref_from_metrics(path: str, out_path: str, fmt: str = "csv"):
    """Compute REF values for designs listed in a YAML/JSON metrics file.

    Expected keys: ``baseline`` (design name), ``benefits``/``costs`` weight
    maps, optional ``epsilon``, and ``designs``: name -> {metric: value}.
    """
    with open(path) as fh:
        text = fh.read()
    data, lines = load_scenario_text(text)
    for key in ("baseline", "benefits", "costs", "designs"):
        if key not in data:
            raise ScenarioError("missing required key", key, None)
    spec = RefSpec(data["benefits"], data["costs"], tuple(data.get("constraints", ()) or ()),
                   float(data.get("epsilon", 1e-3)))
    designs = data["designs"]
    if data["baseline"] not in designs:
        raise ScenarioError("baseline is not one of the designs", "baseline", lines.get("baseline"))
    names = list(spec.benefits) + list(spec.costs)
    base = DesignPoint(data["baseline"], {k: designs[data["baseline"]][k] for k in names})
    results = {}
    for name, m in designs.items():
        if name == data["baseline"]:
            continue
        missing = [k for k in names if k not in m]
        if missing:
            raise ScenarioError(f"missing metrics {missing}", f"designs.{name}", lines.get(f"designs.{name}"))
        results[name] = ref(spec, design_deltas(DesignPoint(name, {k: m[k] for k in names}), base, names))
    write_report(out_path, results, spec, fmt)
    return results


# ---------------------------------------------------------------------------
# argparse front end


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trihybrid", description="Tri-hybrid MIMO scenario runner")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="execute a scenario file")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int, default=None, help="override the scenario root seed")
    r.add_argument("--out-dir", default=".")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for realizations")
    r.add_argument("--format", choices=("csv", "json"), default="csv", help="results table format")

    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("scenario")

    f = sub.add_parser("ref", help="REF report from a metrics file")
    f.add_argument("metrics")
    f.add_argument("--out-dir", default=".")
    f.add_argument("--format", choices=("csv", "json"), default="csv")
    f.add_argument("--seed", type=int, default=None, help="accepted for symmetry; REF is deterministic")
    f.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; REF is single-threaded")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.verb == "validate":
            data, lines, _ = load_scenario(args.scenario)
            errs = validate(data, lines)
            for e in errs:
                print(f"{args.scenario}: {e}", file=sys.stderr)
            if not errs:
                print(f"{args.scenario}: ok")
            return 1 if errs else 0
        if args.verb == "run":
            paths = run_scenario(args.scenario, args.out_dir, args.seed, args.jobs, args.format)
            for k, v in paths.items():
                print(f"{k}: {v}")
            return 0
        if args.verb == "ref":
            os.makedirs(args.out_dir, exist_ok=True)
            stem = os.path.splitext(os.path.basename(args.metrics))[0]
            out = os.path.join(args.out_dir, f"{stem}_ref.{args.format}")
            results = ref_from_metrics(args.metrics, out, args.format)
            for name, res in results.items():
                val = "cost-neutral" if res.value is None else f"{res.value:.6g} ({to_db(res.value):.2f} dB)"
                print(f"{name}: REF = {val}")
            print(f"report: {out}")
            return 0
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 1


if __name__ == "__main__":
    sys.exit(main())
