from __future__ import annotations

import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import worked_arrays, write_trial_csv
from late_bounds.cli import main
from late_bounds.report import AnalysisReport
from late_bounds.simulate import format_scenario, design_scenario


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_json_report(capsys, worked_csv):
    code, out, err = _run(capsys, "analyze", "--data", worked_csv, "--bootstrap", 100, "--xi-threshold", 0.25, "--effect-threshold", 0.5)
    assert code == 0
    rep = AnalysisReport.from_json(out)
    assert rep.itt["estimate"] == pytest.approx(-0.761, abs=1e-12)
    assert rep.mu_h["estimate"] == pytest.approx(0.814, abs=1e-12)
    assert rep.metadata["a_grid"] == pytest.approx([0.0, 0.25, 0.814, 1.0])
    assert rep.metadata["gamma_grid"] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert rep.metadata["input_sha256"] == hashlib.sha256(worked_csv.read_bytes()).hexdigest()
    assert rep.cell(0.75, 0.0).delta == pytest.approx(-0.60, abs=0.01)
    conv = rep.cell(0.0, 0.0)
    assert conv.status == "convention" and conv.se == 0.0 and (conv.ci_lower, conv.ci_upper) == (0.0, 0.0)
    assert rep.thresholds["xi"]["gamma_star"] == pytest.approx(0.690, abs=0.001)
    by_gamma = {r["gamma"]: r for r in rep.thresholds["effect"]["by_gamma"]}
    assert by_gamma[0.5]["a_star"] == pytest.approx(0.192, abs=0.001)
    assert by_gamma[0.75]["status"] == "always"
    for cell in rep.grid:
        assert cell.ci_lower <= cell.ci_upper


def test_report_json_round_trip(capsys, worked_csv, tmp_path):
    out_path = tmp_path / "r.json"
    code, _, _ = _run(capsys, "analyze", "--data", worked_csv, "--bootstrap", 50, "--out", out_path)
    assert code == 0
    text = out_path.read_text()
    rep = AnalysisReport.from_json(text)
    assert rep.to_json() == text.rstrip("\n")
    assert rep.to_dict() == json.loads(text)
    assert "NaN" not in text


def test_gamma_one_columns_equal_itt(capsys, worked_csv):
    code, out, _ = _run(capsys, "analyze", "--data", worked_csv, "--gamma-grid", "1", "--bootstrap", 20)
    rep = AnalysisReport.from_json(out)
    for cell in rep.grid:
        assert cell.delta == rep.itt["estimate"]
        assert cell.se == pytest.approx(rep.itt["se"], rel=1e-12)
        assert cell.wald_statistic == pytest.approx(rep.itt["wald_statistic"], rel=1e-12)


def test_threshold_transform_perfect_instrument(capsys, tmp_path):
    rng = np.random.default_rng(0)
    z = np.r_[np.ones(30), np.zeros(30)]
    a = np.r_[rng.uniform(0.6, 1.0, 30), np.zeros(30)]
    path = write_trial_csv(tmp_path / "d.csv", z, a, rng.normal(size=60))
    code, out, _ = _run(capsys, "analyze", "--data", path, "--transform", "threshold:0.5", "--a-grid", "0.6,0.9", "--bootstrap", 20)
    rep = AnalysisReport.from_json(out)
    assert rep.mu_h["estimate"] == 1.0
    for cell in rep.grid:
        assert cell.delta == pytest.approx(rep.itt["estimate"], rel=1e-14)


def test_table_and_csv_formats(capsys, worked_csv):
    code, out, _ = _run(capsys, "analyze", "--data", worked_csv, "--bootstrap", 20, "--format", "table")
    assert code == 0 and "gamma" in out and "-0.420" in out
    code, out, _ = _run(capsys, "analyze", "--data", worked_csv, "--bootstrap", 20, "--format", "csv")
    rows = list(csv.DictReader(out.splitlines()))
    assert len(rows) == 20 and rows[0]["status"] == "convention"


def test_spline_adjustment(capsys, worked_csv):
    code, out, _ = _run(capsys, "analyze", "--data", worked_csv, "--spline", "l:quartiles", "--bootstrap", 20)
    assert code == 0
    rep = AnalysisReport.from_json(out)
    assert rep.itt["method"] == "ols_adjusted"
    assert rep.metadata["adjustment"] == "rcs(l:quartiles)"


@pytest.mark.parametrize(
    "argv, code",
    [
        (["--gamma-grid", "0,1.5"], 2),
        (["--itt", "diff", "--adjust", "l"], 2),
        (["--adjust", "age"], 2),
        (["--spline", "l:3/2/1", "--itt", "ols"], 2),
        (["--adjust", "l", "--spline", "l:quartiles"], 3),
        (["--transform", "table:/no/such/file.csv"], 4),
    ],
)
def test_analyze_exit_codes(capsys, worked_csv, argv, code):
    got, _, err = _run(capsys, "analyze", "--data", worked_csv, "--bootstrap", 10, *argv)
    assert got == code
    assert err.startswith("error:")


def test_bad_rows_report_context(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("z,a,y\n1,0.5,1\n0,0.2,2\n1,0.4,3\n0,0,4\n")
    code, _, err = _run(capsys, "analyze", "--data", path)
    assert code == 2
    assert "row 1" in err and "'a'" in err
    path.write_text("z,y\n1,1\n")
    assert _run(capsys, "analyze", "--data", path)[0] == 2
    assert _run(capsys, "analyze", "--data", tmp_path / "missing.csv")[0] == 4


def test_sweep_explicit_pair(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code, _, _ = _run(capsys, "sweep", "--itt", -0.761, "--mu-h", 0.814, "--gamma-grid", "0,0.5,1", "--out", out)
    assert code == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert len(rows) == 303
    keys = [(float(r["gamma"]), float(r["a"])) for r in rows]
    assert keys == sorted(keys)
    # curves cross at a = mu_h with the ITT as common value
    gammas = (0.0, 0.5, 1.0)
    a = np.linspace(0, 1, 101)
    for g in gammas:
        d = np.array([float(r["delta"]) for r in rows if float(r["gamma"]) == g])
        assert np.interp(0.814, a, d) == pytest.approx(-0.761, abs=1e-9)


def test_sweep_zero_itt_and_perfect_instrument(capsys, tmp_path):
    out = tmp_path / "s.csv"
    _run(capsys, "sweep", "--itt", 0, "--mu-h", 0.5, "--out", out)
    assert all(float(r["delta"]) == 0.0 for r in csv.DictReader(out.read_text().splitlines()))
    _run(capsys, "sweep", "--itt", -0.5, "--mu-h", 1.0, "--a-grid", "0,1", "--out", out)
    rows = list(csv.DictReader(out.read_text().splitlines()))
    d1 = [float(r["delta"]) for r in rows if r["a"] == "1.0"]
    d0 = [float(r["delta"]) for r in rows if r["a"] == "0.0"]
    gam = [float(r["gamma"]) for r in rows if r["a"] == "0.0"]
    assert np.allclose(d1, -0.5)
    assert np.allclose(d0, [-0.5 * g for g in gam])


def test_sweep_from_data_with_ci(capsys, worked_csv, tmp_path):
    out = tmp_path / "s.csv"
    args = ("sweep", "--data", worked_csv, "--a-grid", "0,0.5,1", "--bootstrap", 50, "--seed", 4, "--out", out)
    assert _run(capsys, *args)[0] == 0
    first = out.read_text()
    rows = list(csv.DictReader(first.splitlines()))
    assert all(r["se"] != "" and r["ci_lo"] != "" for r in rows)
    _run(capsys, *args)
    assert out.read_text() == first


def test_sweep_conflicting_inputs(capsys, worked_csv):
    code, _, err = _run(capsys, "sweep", "--data", worked_csv, "--itt", -0.7, "--mu-h", 0.8)
    assert code == 2 and "not both" in err
    assert _run(capsys, "sweep", "--itt", -0.7)[0] == 2


def test_sweep_svg(capsys, tmp_path):
    pytest.importorskip("matplotlib")
    svg = tmp_path / "fig.svg"
    code, _, _ = _run(capsys, "sweep", "--itt", -0.761, "--mu-h", 0.814, "--out", tmp_path / "s.csv", "--svg", svg)
    assert code == 0
    assert svg.read_text().lstrip().startswith("<?xml")
    assert (tmp_path / "fig_gamma.svg").exists()


def test_simulate_small_k_warns(capsys, tmp_path):
    out = tmp_path / "mc.json"
    code, _, err = _run(capsys, "simulate", "--scenario", "t2_g050_mid_n250", "--k", 2, "--b", 10, "--seed", 17, "--out", out)
    assert code == 0
    assert "unreliable" in err
    summary = json.loads(out.read_text())
    assert summary["K"] == 2 and [r["quantity"] for r in summary["rows"]][0] == "itt"


def test_simulate_missing_key(capsys, tmp_path):
    text = format_scenario(design_scenario(0.5, "mid", 100))
    path = tmp_path / "s.txt"
    path.write_text("\n".join(line for line in text.splitlines() if not line.startswith("sigma_y")))
    code, _, err = _run(capsys, "simulate", "--scenario", path, "--k", 2)
    assert code == 2 and "sigma_y" in err
    assert _run(capsys, "simulate", "--scenario", "no_such_scenario")[0] == 4


def test_module_entry_point(tmp_path):
    z, a, y, l = worked_arrays(40, 40)
    path = write_trial_csv(tmp_path / "t.csv", z, a, y)
    proc = subprocess.run(
        [sys.executable, "-m", "late_bounds", "analyze", "--data", str(path), "--bootstrap", "20", "--format", "table"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "ITT" in proc.stdout
