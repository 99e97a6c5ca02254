import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from trihybrid.exceptions import (
    InvalidParameterError,
    LinearityViolationError,
    SpecificationError,
    UndefinedBaselineError,
)
from trihybrid.ref_metric import (
    RIBEIRO_STYLE,
    DesignPoint,
    Metric,
    PowerConsumptionModel,
    RefSpec,
    design_deltas,
    ref,
    regime_preset,
    relative_change,
    power_consumption,
    to_db,
    write_report,
)


class TestRelativeChange:
    def test_same(self):
        assert relative_change(3.0, 3.0) == 0

    def test_aperture(self):
        assert relative_change(3.0, 1.0) == 2.0

    def test_power(self):
        assert relative_change(12e-3, 20e-3) == pytest.approx(0.4, abs=1e-15)

    def test_zero_reference(self):
        with pytest.raises(UndefinedBaselineError):
            relative_change(1.0, 0.0)

    def test_log_units_rejected(self):
        with pytest.raises(LinearityViolationError):
            relative_change(Metric(10.0, "dBm"), Metric(13.0, "dBm"))
        with pytest.raises(LinearityViolationError):
            relative_change(Metric(1.0, "W", is_logarithmic=True), 2.0)


class TestRef:
    spec = RefSpec({"p_tx": 0.5}, {"area": 0.5})

    def test_table_design1(self):
        assert ref(self.spec, {"p_tx": 0.4, "area": 2.0}).value == pytest.approx(0.2, abs=1e-15)

    def test_table_design2(self):
        r = ref(self.spec, {"p_tx": 0.465, "area": 4.0}).value
        assert r == pytest.approx(0.11625, abs=1e-15)
        assert abs(r - 0.12) < 0.01

    def test_sim_peak(self):
        r = ref(RefSpec.simple("se", "p"), {"se": 3.9, "p": 0.021})
        assert r.value == pytest.approx(185.714, rel=1e-5)
        assert abs(r.value_db - 22.7) < 0.05

    def test_overlap(self):
        with pytest.raises(SpecificationError):
            RefSpec({"a": 0.5}, {"a": 0.5})

    def test_weights_sum(self):
        with pytest.raises(SpecificationError):
            RefSpec({"a": 0.5}, {"b": 0.6})

    def test_empty_sets(self):
        with pytest.raises(SpecificationError):
            RefSpec({"a": 1.0}, {})

    def test_missing_delta(self):
        with pytest.raises(SpecificationError):
            ref(self.spec, {"p_tx": 0.4})

    def test_guard(self):
        r = ref(self.spec, {"p_tx": 0.4, "area": 1e-6})
        assert r.cost_neutral and r.value is None and r.value_db is None
        assert r.regularized == pytest.approx(0.2 / 1e-3)

    def test_zero_cost_no_epsilon(self):
        r = ref(RefSpec({"a": 0.5}, {"b": 0.5}, epsilon=0.0), {"a": 0.3, "b": 0.0})
        assert r.cost_neutral and r.value is None and r.regularized is None

    def test_guard_from_designs(self):
        base = DesignPoint("b", {"p_tx": 1.0, "area": 1.0})
        d = DesignPoint("d", {"p_tx": 0.5, "area": 1.0 + 1e-9})
        r = ref(self.spec, design_deltas(d, base))
        assert r.cost_neutral

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-3, 1e3), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10))
    def test_scale_invariance(self, c, a1, a2, b1, b2):
        base = DesignPoint("b", {"se": a1, "p": b1})
        des = DesignPoint("d", {"se": a2, "p": b2})
        spec = RefSpec.simple("se", "p", epsilon=0.0)
        d0 = design_deltas(des, base)
        assume(d0["p"] > 1e-9)
        d1 = design_deltas(des.scaled(c), base.scaled(c))
        for k in d0:
            assert abs(d0[k] - d1[k]) <= 1e-14 * max(1.0, d0[k])
        r0, r1 = ref(spec, d0), ref(spec, d1)
        if not r0.cost_neutral:
            assert r1.value == pytest.approx(r0.value, rel=1e-13)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.05, 0.9), st.floats(0.05, 0.9), st.floats(0, 5), st.floats(0, 5), st.floats(0.01, 5),
           st.floats(1e-3, 1e3))
    def test_weight_homogeneity(self, u, v, ga, gb, c, lam):
        assume(u + v < 0.99 and (1 - u - v) * c > 1e-3)
        w = {"a": u, "b": v, "c": 1 - u - v}
        d = {"a": ga, "b": gb, "c": c}
        r = ref(RefSpec({"a": u, "b": v}, {"c": w["c"]}), d)
        # unnormalized weights are rejected, so compare with the raw scaled ratio
        raw = (lam * u * ga + lam * v * gb) / (lam * w["c"] * c)
        assert r.value == pytest.approx(raw, rel=1e-12)
        with pytest.raises(SpecificationError):
            RefSpec({"a": 2 * u, "b": 2 * v}, {"c": 2 * w["c"]})

    def test_db_bridge(self):
        for x in [0.2, 1.0, 185.7, 1e-4]:
            r = ref(RefSpec.simple("a", "b", epsilon=0.0), {"a": x, "b": 1.0})
            assert r.value_db == 10 * math.log10(r.value)
        assert to_db(0.0) == -math.inf


class TestPresets:
    def test_perf(self):
        assert ref(regime_preset("perf"), {"performance": 0.5, "cost": 0.25}).value == 2.0

    def test_save(self):
        assert ref(regime_preset("save"), {"saving": 0.8, "performance": 0.1}).value == pytest.approx(8.0, abs=1e-14)

    def test_area(self):
        spec = regime_preset("area")
        assert spec.constraints == ("performance",)
        assert ref(spec, {"saving": 0.4, "area": 0.2}).value == 2.0

    def test_unknown(self):
        with pytest.raises(SpecificationError):
            regime_preset("bogus")


class TestPowerConsumption:
    def test_chi_endpoints(self):
        m = RIBEIRO_STYLE
        assert power_consumption(m, 4, variant="reconfig", chi=0.0) == power_consumption(m, 4)
        assert power_consumption(m, 4, variant="reconfig", chi=1.0) == power_consumption(m, 4, variant="dual")

    def test_static_sum(self):
        m = PowerConsumptionModel(p_tx=1.0, eta_pa=0.5, p_lo=0.1, p_rf=0.2)
        assert power_consumption(m, 3) == pytest.approx(2.0 + 0.1 + 0.6)

    def test_dac_doubling(self):
        m = RIBEIRO_STYLE
        base = power_consumption(m, 4)
        t3 = power_consumption(m, 4, 3) - base
        t4 = power_consumption(m, 4, 4) - base
        assert t4 == pytest.approx(2 * t3, rel=1e-14)

    def test_bias(self):
        m = RIBEIRO_STYLE
        assert power_consumption(m, 1, None, 10) - power_consumption(m, 1) == pytest.approx(6.5e-3)

    def test_negative_chi(self):
        with pytest.raises(InvalidParameterError):
            power_consumption(RIBEIRO_STYLE, 1, variant="reconfig", chi=-0.1)

    def test_bad_model(self):
        with pytest.raises(InvalidParameterError):
            PowerConsumptionModel(p_rf=-1.0)


def test_report_formats(tmp_path):
    spec = RefSpec({"p_tx": 0.5}, {"area": 0.5})
    res = {"d1": ref(spec, {"p_tx": 0.4, "area": 2.0}), "d0": ref(spec, {"p_tx": 0.4, "area": 0.0})}
    write_report(tmp_path / "r.csv", res, spec)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "design,metric,delta,role,ref_linear,ref_db,cost_neutral"
    assert "d1,p_tx,0.4,benefit,0.2," in lines[1]
    write_report(tmp_path / "r.json", res, spec, fmt="json")
    out = json.loads((tmp_path / "r.json").read_text())
    assert out["d0"]["cost_neutral"] is True and out["d0"]["ref_linear"] is None
    assert out["d1"]["deltas"]["area"]["role"] == "cost"
