import csv
import json
import os
import subprocess
import sys

import pytest

from trihybrid.cli import load_scenario_text, main, run_scenario, validate

SCEN = os.path.join(os.path.dirname(__file__), os.pardir, "scenarios")


def scen(name):
    return os.path.join(SCEN, name)


def diag(text):
    data, lines = load_scenario_text(text)
    return validate(data, lines)


class TestValidate:
    def test_valid_files(self):
        for name in sorted(os.listdir(SCEN)):
            if name.endswith(".yaml") and name not in ("pass_infeasible.yaml", "table3_metrics.yaml"):
                assert main(["validate", scen(name)]) == 0, name

    def test_unknown_architecture(self):
        errs = diag("scenario_id: x\narchitecture: warp_drive\n")
        assert len(errs) == 1 and errs[0].field == "architecture" and errs[0].line == 2

    def test_pass_feasibility(self):
        errs = diag("scenario_id: x\narchitecture: pass\nsweep:\n  num_pinches: [4]\n  alpha: [0.6]\n")
        assert len(errs) == 1 and "infeasible" in str(errs[0]) and "alpha" in errs[0].field

    def test_realizations(self):
        errs = diag("scenario_id: x\narchitecture: sim\nrealizations: 0\n")
        assert [e.field for e in errs] == ["realizations"]

    def test_unknown_axis(self):
        errs = diag("scenario_id: x\narchitecture: sim\nsweep:\n  warp: [1]\n")
        assert errs and "warp" in errs[0].field

    def test_infeasible_file_exit(self, capsys):
        assert main(["validate", scen("pass_infeasible.yaml")]) == 1
        assert "infeasible" in capsys.readouterr().err


class TestRun:
    def test_empty_sweep_header_only(self, tmp_path):
        paths = run_scenario(scen("empty_sweep.yaml"), str(tmp_path))
        lines = open(paths["results"]).read().splitlines()
        body = [l for l in lines if not l.startswith("#")]
        assert body == ["scenario_id,layers,realization,se_bits_per_hz,p_radiated_w,p_consumed_w"]

    def test_provenance(self, tmp_path):
        paths = run_scenario(scen("table3_parasitic.yaml"), str(tmp_path))
        head = [l for l in open(paths["results"]).read().splitlines() if l.startswith("#")]
        text = "\n".join(head)
        assert "sha256" in text and "seed" in text and "trihybrid" in text

    def test_rerun_byte_identical(self, tmp_path):
        a = run_scenario(scen("pass_alpha.yaml"), str(tmp_path / "a"), seed=11)
        b = run_scenario(scen("pass_alpha.yaml"), str(tmp_path / "b"), seed=11, jobs=2)
        assert open(a["results"], "rb").read() == open(b["results"], "rb").read()

    def test_seed_changes_output(self, tmp_path):
        a = run_scenario(scen("pass_alpha.yaml"), str(tmp_path / "a"), seed=1)
        b = run_scenario(scen("pass_alpha.yaml"), str(tmp_path / "b"), seed=2)
        assert open(a["results"], "rb").read() != open(b["results"], "rb").read()

    def test_table_summary_has_ref(self, tmp_path):
        paths = run_scenario(scen("table3_parasitic.yaml"), str(tmp_path))
        s = json.load(open(paths["summary"]))
        refs = {r["point"]["design"]: r for r in s["ref"]}
        assert set(refs) == {"design1", "design2"}
        assert refs["design1"]["ref_linear"] == pytest.approx(0.2, abs=1e-12)
        assert refs["design2"]["ref_linear"] == pytest.approx(0.11625, abs=1e-12)
        assert refs["design2"]["deltas"] == {"p_tx": pytest.approx(0.465), "area": 4.0}

    def test_results_columns(self, tmp_path):
        paths = run_scenario(scen("wire_fieldmap.yaml"), str(tmp_path))
        rows = list(csv.DictReader(l for l in open(paths["results"]) if not l.startswith("#")))
        assert len(rows) == 4
        assert {"z_load", "excited", "null_count", "null_index", "se_bits_per_hz"} <= set(rows[0])

    def test_json_format(self, tmp_path):
        paths = run_scenario(scen("table3_parasitic.yaml"), str(tmp_path), fmt="json")
        body = json.load(open(paths["results"]))
        assert body["columns"][0] == "scenario_id" and len(body["rows"]) == 3

    def test_missing_file_exit(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.yaml")]) == 4

    def test_invalid_file_exit(self, tmp_path):
        assert main(["run", scen("pass_infeasible.yaml"), "--out-dir", str(tmp_path)]) == 2


def test_ref_verb(tmp_path, capsys):
    assert main(["ref", scen("table3_metrics.yaml"), "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "design1: REF = 0.2 " in out and "design2: REF = 0.11625" in out
    rows = list(csv.DictReader(open(tmp_path / "table3_metrics_ref.csv")))
    assert {r["design"] for r in rows} == {"design1", "design2"}


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "trihybrid.cli", "validate", scen("sim_ref.yaml")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "ok" in r.stdout
