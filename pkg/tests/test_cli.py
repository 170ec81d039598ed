import csv
import json
import subprocess
import sys

import pytest

from dcapep.cli import main


def run(tmp_path, *args):
    return main(["--out", str(tmp_path), *args])


def test_tightness(tmp_path, capsys):
    assert run(tmp_path, "tightness", "--L1", "8", "--N", "3") == 0
    assert "2" in capsys.readouterr().out
    assert run(tmp_path, "tightness", "--L1", "1", "--N", "0") == 2


def test_bound(tmp_path, capsys):
    assert run(tmp_path, "bound", "--L1", "8", "--L2", "inf", "--N", "3") == 0
    assert "2" in capsys.readouterr().out
    assert run(tmp_path, "bound", "--theorem", "thm31_i", "--L1", "4", "--L2", "1") == 2


def test_run_writes_trace(tmp_path):
    cfg = tmp_path / "inst.json"
    cfg.write_text(json.dumps({"family": "quadratic",
                               "params": {"Q1": [[2.0]], "b1": [0.0], "Q2": [[0.0]], "b2": [1.0]}}))
    assert run(tmp_path, "run", "--instance", str(cfg), "--x1", "0", "--eps", "1e-12") == 0
    rows = list(csv.DictReader(open(tmp_path / "trace.csv")))
    assert len(rows) == 2 and float(rows[1]["x_1"]) == pytest.approx(0.5)
    assert run(tmp_path, "run", "--instance", "tightness:L1=8,N=3", "--max-iter", "3") == 0
    assert run(tmp_path, "run", "--instance", "nope") == 2


def test_pep_solve_and_export(tmp_path):
    assert run(tmp_path, "pep", "solve", "--L1", "8", "--L2", "inf", "--N", "3") == 0
    assert list(tmp_path.glob("pep_gradient_gap_N3_solution.csv"))
    assert run(tmp_path, "pep", "export", "--L1", "8", "--L2", "inf", "--N", "1") == 0
    assert list(tmp_path.glob("*.dat-s"))


def test_certify_single_case(tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps([{"mu1": 0, "L1": "inf", "mu2": 0, "L2": 1, "N": 2}]))
    code = run(tmp_path, "certify", "--theorem", "thm41_bound_B2", "--grid", str(grid), "--samples", "50")
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "certify_thm41_bound_B2.csv")))
    assert [r["variant"] for r in rows] == ["printed", "repaired"]


def test_counterexample(tmp_path):
    assert run(tmp_path, "counterexample", "--iterations", "10") == 0
    assert (tmp_path / "counterexample.csv").exists()


def test_sweep(tmp_path):
    assert run(tmp_path, "sweep", "--L1", "1,2", "--L2", "1,inf", "--N", "1") == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert len(rows) == 4
    for r in rows:
        assert float(r["pep_value"]) <= float(r["closed_form_bound"]) * (1 + 1e-5)
        assert r["certificate_ok"] == "True"
        if r["best_empirical"]:
            assert float(r["best_empirical"]) <= float(r["closed_form_bound"]) + 1e-9
    assert (tmp_path / "sweep.dat").read_text().startswith("#")
    assert run(tmp_path, "sweep", "--N", "11") == 2


def test_seed_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DCAPEP_SEED", "abc")
    assert run(tmp_path, "counterexample") == 2


def test_help_and_module_entry():
    assert main(["--help"]) == 0
    out = subprocess.run([sys.executable, "-m", "dcapep", "--out", "/tmp/x", "bound", "--L1", "1", "--L2", "1"],
                         capture_output=True, text=True)
    assert out.returncode == 0


def test_global_options_after_subcommand(tmp_path):
    assert main(["counterexample", "--iterations", "3", "--seed", "7", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "counterexample.csv").exists()
