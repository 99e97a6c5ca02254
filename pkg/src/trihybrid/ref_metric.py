"""Reconfigurability efficiency factor (REF) and power-consumption accounting.

``Upsilon = sum_G w_i Delta_i / max(sum_B w_j Delta_j, eps)`` where
``Delta = |Q - Q_ref| / |Q_ref|`` is computed on linear-unit metrics only.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from .exceptions import (
    InvalidParameterError,
    LinearityViolationError,
    SpecificationError,
    UndefinedBaselineError,
)

__all__ = [
    "Metric",
    "DesignPoint",
    "RefSpec",
    "RefResult",
    "relative_change",
    "design_deltas",
    "ref",
    "regime_preset",
    "to_db",
    "PowerConsumptionModel",
    "RIBEIRO_STYLE",
    "power_consumption",
    "write_report",
]

DEFAULT_EPSILON = 1e-3
LOG_UNITS = {"db", "dbm", "dbw", "dbi", "db(w)"}


@dataclass(frozen=True)
class Metric:
    """A metric value in linear units with a unit tag."""

    value: float
    unit: str = ""
    is_logarithmic: bool = False

    def __post_init__(self):
        if self.unit.strip().lower() in LOG_UNITS and not self.is_logarithmic:
            object.__setattr__(self, "is_logarithmic", True)


def _as_metric(q) -> Metric:
    return q if isinstance(q, Metric) else Metric(float(q))


@dataclass(frozen=True)
class DesignPoint:
    """Named bundle of metrics, e.g. ``{"se": Metric(4.2, "bps/Hz"), ...}``."""

    name: str
    metrics: Mapping[str, Metric] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "metrics", {k: _as_metric(v) for k, v in dict(self.metrics).items()})

    def __getitem__(self, key) -> Metric:
        return self.metrics[key]

    def scaled(self, c: float) -> "DesignPoint":
        return DesignPoint(self.name, {k: Metric(v.value * c, v.unit, v.is_logarithmic)
                                       for k, v in self.metrics.items()})


def relative_change(q, q_ref) -> float:
    """``|q - q_ref| / |q_ref|`` for linear-unit metrics."""
    q, q_ref = _as_metric(q), _as_metric(q_ref)
    if q.is_logarithmic or q_ref.is_logarithmic:
        raise LinearityViolationError(
            f"REF inputs must be linear; got unit {q.unit or q_ref.unit!r}", "ref_metric")
    if q_ref.value == 0:
        raise UndefinedBaselineError("reference metric is zero; relative change undefined", "ref_metric")
    return abs(q.value - q_ref.value) / abs(q_ref.value)


@dataclass(frozen=True)
class RefSpec:
    """Benefit/cost partition with weights, constraint set and threshold ``epsilon``."""

    benefits: Mapping[str, float]
    costs: Mapping[str, float]
    constraints: tuple = ()
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        b, c = dict(self.benefits), dict(self.costs)
        if not b or not c:
            raise SpecificationError("benefit and cost sets must both be nonempty", "ref_metric")
        overlap = set(b) & set(c)
        if overlap:
            raise SpecificationError(f"metrics in both benefit and cost sets: {sorted(overlap)}", "ref_metric")
        if set(self.constraints) & (set(b) | set(c)):
            raise SpecificationError("constraint metrics cannot be benefits or costs", "ref_metric")
        w = np.array(list(b.values()) + list(c.values()), dtype=float)
        if np.any(w < 0) or np.any(w > 1):
            raise SpecificationError("weights must lie in [0, 1]", "ref_metric")
        if abs(w.sum() - 1.0) > 1e-9:
            raise SpecificationError(f"weights must sum to 1, got {w.sum():.6g}", "ref_metric")
        if self.epsilon < 0:
            raise SpecificationError("epsilon must be >= 0", "ref_metric")
        object.__setattr__(self, "benefits", b)
        object.__setattr__(self, "costs", c)
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @classmethod
    def simple(cls, benefit: str, cost: str, constraints=(), epsilon: float = DEFAULT_EPSILON) -> "RefSpec":
        """One benefit and one cost with equal weights."""
        return cls({benefit: 0.5}, {cost: 0.5}, tuple(constraints), epsilon)


@dataclass(frozen=True)
class RefResult:
    """Outcome of a REF evaluation.

    ``value`` is ``None`` when the weighted cost is below ``epsilon`` (or
    exactly zero with ``epsilon = 0``); ``regularized`` then still holds
    ``benefit / max(cost, epsilon)`` when that is finite.
    """

    value: Optional[float]
    cost_neutral: bool
    benefit_sum: float
    cost_sum: float
    regularized: Optional[float]
    deltas: Mapping[str, float]

    @property
    def value_db(self) -> Optional[float]:
        return None if self.value is None else to_db(self.value)


def to_db(x: float) -> float:
    """``10 log10(x)`` for a linear, positive quantity."""
    if x <= 0:
        return -math.inf if x == 0 else math.nan
    return 10.0 * math.log10(x)


def ref(spec: RefSpec, deltas: Mapping[str, float]) -> RefResult:
    """Evaluate the REF for precomputed relative changes."""
    missing = [k for k in list(spec.benefits) + list(spec.costs) if k not in deltas]
    if missing:
        raise SpecificationError(f"no relative change supplied for {missing}", "ref_metric")
    d = {k: float(v) for k, v in deltas.items()}
    if any(v < 0 for v in d.values()):
        raise InvalidParameterError("relative changes must be >= 0", "ref_metric")
    num = sum(w * d[k] for k, w in spec.benefits.items())
    den = sum(w * d[k] for k, w in spec.costs.items())
    neutral = den < spec.epsilon or den == 0
    reg = num / max(den, spec.epsilon) if max(den, spec.epsilon) > 0 else None
    return RefResult(None if neutral else num / den, neutral, num, den, reg, d)


def design_deltas(design: DesignPoint, baseline: DesignPoint, names: Optional[Sequence[str]] = None):
    """Relative change of every metric (or ``names``) against the baseline."""
    keys = list(design.metrics) if names is None else list(names)
    return {k: relative_change(design[k], baseline[k]) for k in keys}


_REGIMES = {
    "perf": ("performance", "cost"),
    "save": ("saving", "performance"),
    "area": ("saving", "area"),
}


def regime_preset(name: str, epsilon: float = DEFAULT_EPSILON) -> RefSpec:
    """Single-benefit single-cost presets.

    ``perf``: benefit ``performance``, cost ``cost``; ``save``: benefit
    ``saving``, cost ``performance``; ``area``: benefit ``saving``, cost
    ``area`` (performance held fixed).
    """
    if name not in _REGIMES:
        raise SpecificationError(f"unknown regime {name!r}; choose from {sorted(_REGIMES)}", "ref_metric")
    b, c = _REGIMES[name]
    cons = ("performance",) if name == "area" else ()
    return RefSpec.simple(b, c, cons, epsilon)


# ---------------------------------------------------------------------------
# power consumption


@dataclass(frozen=True)
class PowerConsumptionModel:
    """Transmitter power budget components (Watts).

    ``P_DAC(b) = c_dac * 2**b * f_s`` per converter, ``dacs_per_chain``
    converters (I and Q) per RF chain.
    """

    p_tx: float = 1.0
    eta_pa: float = 0.27
    p_lo: float = 22.5e-3
    p_rf: float = 40e-3
    p_bias: float = 0.65e-3
    c_dac: float = 4.5e-12
    f_s: float = 1e9
    dacs_per_chain: int = 2

    def __post_init__(self):
        vals = [self.p_tx, self.p_lo, self.p_rf, self.p_bias, self.c_dac, self.f_s]
        if any(v < 0 for v in vals) or not 0 < self.eta_pa <= 1 or self.dacs_per_chain < 0:
            raise InvalidParameterError("power-model components must be non-negative, 0 < eta_pa <= 1",
                                        "ref_metric")

    @property
    def p_pa(self) -> float:
        return self.p_tx / self.eta_pa

    def p_dac(self, bits: int) -> float:
        if bits < 0:
            raise InvalidParameterError("DAC bits must be >= 0", "ref_metric")
        return self.c_dac * 2.0 ** bits * self.f_s


RIBEIRO_STYLE = PowerConsumptionModel()


def power_consumption(model: PowerConsumptionModel, N_rf: int, N_dac_bits: Optional[int] = None,
                      N_bias_elements: int = 0, variant: str = "static", chi: float = 0.0) -> float:
    """Consumed power in Watts.

    ``static``: ``P_PA + P_LO + N_rf P_RF``; ``dual``: ``2 N_rf P_RF``;
    ``reconfig``: ``(1 + chi) N_rf P_RF``. Signal DACs
    (``N_rf * dacs_per_chain * P_DAC(b)``) are added when ``N_dac_bits`` is
    given and varactor bias DACs (``N_bias_elements * p_bias``) always.
    """
    if N_rf < 0 or N_bias_elements < 0:
        raise InvalidParameterError("counts must be >= 0", "ref_metric")
    if chi < 0:
        raise InvalidParameterError("chi must be >= 0", "ref_metric")
    factor = {"static": 1.0, "dual": 2.0, "reconfig": 1.0 + chi}.get(variant)
    if factor is None:
        raise InvalidParameterError(f"unknown variant {variant!r}", "ref_metric")
    p = model.p_pa + model.p_lo + factor * N_rf * model.p_rf
    if N_dac_bits is not None:
        p += N_rf * model.dacs_per_chain * model.p_dac(N_dac_bits)
    p += N_bias_elements * model.p_bias
    return float(p)


def _report_rows(results: Mapping[str, RefResult], spec: RefSpec):
    for name, r in results.items():
        for k, v in r.deltas.items():
            tag = "benefit" if k in spec.benefits else "cost" if k in spec.costs else "constraint"
            yield {
                "design": name,
                "metric": k,
                "delta": v,
                "role": tag,
                "ref_linear": r.value,
                "ref_db": r.value_db,
                "cost_neutral": r.cost_neutral,
            }


def write_report(path, results: Mapping[str, RefResult], spec: RefSpec, fmt: str = "csv"):
    """Write a REF report as CSV (one row per design and metric) or JSON."""
    rows = list(_report_rows(results, spec))
    if fmt == "json":
        out = {name: {"ref_linear": r.value, "ref_db": r.value_db, "cost_neutral": r.cost_neutral,
                      "deltas": {k: {"value": v,
                                     "role": "benefit" if k in spec.benefits else
                                     "cost" if k in spec.costs else "constraint"}
                                 for k, v in r.deltas.items()}}
               for name, r in results.items()}
        with open(path, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
        return
    if fmt != "csv":
        raise InvalidParameterError(f"unknown report format {fmt!r}", "ref_metric")
    cols = ["design", "metric", "delta", "role", "ref_linear", "ref_db", "cost_neutral"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r[k] is None else repr(r[k]) if isinstance(r[k], float) else r[k])
                        for k in cols})
