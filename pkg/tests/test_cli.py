import json
from pathlib import Path

import pytest

from centroidal_bcd.cli import main

EXIT_FORMAT = 64


@pytest.fixture(scope="module")
def trot_scenario(tmp_path_factory):
    path = tmp_path_factory.mktemp("scn") / "trot.scn"
    assert main(["gait", "--kind", "trot", "--horizon", "60", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def solved(tmp_path_factory, trot_scenario):
    out = tmp_path_factory.mktemp("run")
    code = main(["solve", "--scenario", str(trot_scenario), "--out", str(out)])
    assert code == 0
    return out


def test_solve_writes_all_outputs(solved):
    for name in ("trajectory.csv", "convergence.json", "timing.csv", "summary.txt"):
        assert (solved / name).exists(), name
    report = json.loads((solved / "convergence.json").read_text())
    assert report["converged"] is True
    assert report["residuals"]["feasible"] is True
    assert "force_qp_time" not in json.dumps(report)  # timing lives in timing.csv


def test_verify_accepts_solve_output(trot_scenario, solved, capsys):
    code = main(["verify", "--scenario", str(trot_scenario),
                 str(solved / "trajectory.csv")])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["feasible"] is True


def test_verify_detects_single_force_perturbation(trot_scenario, solved, tmp_path, capsys):
    lines = (solved / "trajectory.csv").read_text().splitlines()
    header = lines[0].split(",")
    col = header.index("f_FL_z")
    row = 5 + 1
    fields = lines[row].split(",")
    fields[col] = repr(float(fields[col]) + 1.0)
    lines[row] = ",".join(fields)
    bad = tmp_path / "perturbed.csv"
    bad.write_text("\n".join(lines) + "\n")
    code = main(["verify", "--scenario", str(trot_scenario), str(bad)])
    assert code == 1
    report = json.loads(capsys.readouterr().out)
    # A 1 N force error shows up as a dt-scaled momentum defect.
    assert report["dynamics"] == pytest.approx(0.01, rel=1e-6)
    assert report["feasible"] is False


def test_verify_rejects_truncated_csv(trot_scenario, solved, tmp_path):
    lines = (solved / "trajectory.csv").read_text().splitlines()
    bad = tmp_path / "truncated.csv"
    bad.write_text("\n".join(lines[:-10]) + "\n")
    assert main(["verify", "--scenario", str(trot_scenario), str(bad)]) == EXIT_FORMAT


def test_solve_outputs_are_reproducible(tmp_path, trot_scenario):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["solve", "--scenario", str(trot_scenario), "--out", str(out)]) == 0
        outs.append(out)
    for fname in ("trajectory.csv", "convergence.json", "summary.txt"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes(), fname


def test_forced_non_convergence_exits_3_but_writes(tmp_path, trot_scenario):
    out = tmp_path / "nc"
    code = main(["solve", "--scenario", str(trot_scenario), "--out", str(out),
                 "--eps-f", "0", "--max-iters", "2"])
    assert code == 3
    assert (out / "trajectory.csv").exists()
    report = json.loads((out / "convergence.json").read_text())
    assert report["converged"] is False
    assert report["outer_iterations"] == 2


def test_missing_scenario_exits_1(tmp_path):
    assert main(["solve", "--scenario", str(tmp_path / "nope.scn"),
                 "--out", str(tmp_path)]) == 1


def test_invalid_scenario_exits_1(tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("schema_version: 1\nname: broken\n")
    assert main(["solve", "--scenario", str(bad), "--out", str(tmp_path)]) == 1


def test_bench_reports_scaling(tmp_path, trot_scenario, capsys):
    out = tmp_path / "bench"
    code = main(["bench", "--scenario", str(trot_scenario),
                 "--horizons", "40,80", "--out", str(out), "--seed", "7"])
    assert code == 0
    text = capsys.readouterr().out
    assert "fitted solve-time exponent" in text
    lines = (out / "bench.csv").read_text().splitlines()
    assert lines[0].startswith("N,")
    assert len(lines) == 3
    assert lines[1].split(",")[0] == "40"


def test_bench_single_horizon_reports_na(tmp_path, trot_scenario, capsys):
    out = tmp_path / "bench1"
    assert main(["bench", "--scenario", str(trot_scenario),
                 "--horizons", "40", "--out", str(out)]) == 0
    assert "n/a" in capsys.readouterr().out


def test_gait_rejects_bad_params(tmp_path):
    assert main(["gait", "--kind", "walk", "--out", str(tmp_path / "w.scn"),
                 "--param", "stride=2.0"]) == 1
