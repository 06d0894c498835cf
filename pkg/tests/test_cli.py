import json
import math

import pytest

from mflq.cli import main

TAU = 2.0 * math.pi


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _report(capsys, argv):
    code, out, err = _run(capsys, argv)
    assert code == 0, err
    return json.loads(out)


def test_check_builtin(capsys):
    rep = _report(capsys, ["check", "--config", "example-5", "--grid", "512"])
    assert rep["command"] == "check"
    assert set(rep) == {"command", "inputs_digest", "outputs", "warnings", "wall_time"}
    assert rep["outputs"]["coercivity"]["passed"] is True
    assert any("no policy" in w for w in rep["warnings"])
    assert rep["wall_time"] > 0.0


def test_digest_tracks_inputs(capsys):
    a = _report(capsys, ["check", "--config", "example-5", "--grid", "512"])
    b = _report(capsys, ["check", "--config", "example-5", "--grid", "512"])
    c = _report(capsys, ["check", "--config", "example-5", "--grid", "256"])
    d = _report(capsys, ["check", "--config", "scalar-sc1", "--grid", "512"])
    assert a["inputs_digest"] == b["inputs_digest"]
    assert a["inputs_digest"] != c["inputs_digest"]
    assert a["inputs_digest"] != d["inputs_digest"]


def test_synthesize_policy_roundtrip(capsys, tmp_path):
    pol_path = tmp_path / "policy.json"
    rep = _report(
        capsys,
        [
            "synthesize", "--config", "scalar-sc1", "--grid", "1024",
            "--policy-out", str(pol_path),
        ],
    )
    assert rep["outputs"]["value"]["value"] == pytest.approx(
        math.sqrt(2.0) - 0.5, abs=1e-9
    )
    assert rep["outputs"]["certificate"]["admissible"] is True
    assert pol_path.exists()

    # feeding the written policy back through evaluate recovers the same
    # curves, so the optimality gap is zero to rounding
    rep2 = _report(
        capsys,
        [
            "evaluate", "--config", "scalar-sc1", "--grid", "1024",
            "--policy", str(pol_path),
        ],
    )
    out = rep2["outputs"]
    assert abs(out["gap"]) < 1e-10
    assert out["optimality"]["satisfied"] is True
    assert out["optimality"]["state_condition_sup"] <= 1e-12
    assert out["optimality"]["mean_condition_sup"] <= 1e-12


def test_policy_json_shape(capsys, tmp_path):
    pol_path = tmp_path / "policy.json"
    _report(
        capsys,
        [
            "synthesize", "--config", "scalar-sc1", "--grid", "1024",
            "--policy-out", str(pol_path),
        ],
    )
    doc = json.loads(pol_path.read_text())
    assert doc["tau"] == pytest.approx(1.0)
    assert doc["n"] == 1 and doc["m"] == 1
    body = doc["policy"]
    for key in ("theta", "thetabar", "v"):
        assert "dense" in body[key]
        dense = body[key]["dense"]
        assert len(dense["values"]) == len(dense["derivs"])


def test_evaluate_requires_policy(capsys):
    code, _, err = _run(capsys, ["evaluate", "--config", "scalar-sc1"])
    assert code == 2
    assert "error:" in err


def test_inadmissible_policy_exits_3(capsys, tmp_path):
    pol = {
        "tau": 1.0, "n": 1, "m": 1,
        "policy": {"theta": [[1.0]]},
    }
    path = tmp_path / "runaway.json"
    path.write_text(json.dumps(pol))
    code, _, err = _run(
        capsys,
        ["evaluate", "--config", "scalar-sc1", "--grid", "1024",
         "--policy", str(path)],
    )
    assert code == 3
    assert "numerical failure" in err


def test_coarse_grid_exits_4(capsys):
    code, _, err = _run(
        capsys, ["synthesize", "--config", "example-5", "--grid", "512"]
    )
    assert code == 4
    assert "no convergence" in err


def test_simulate_csv_outputs(capsys, tmp_path):
    paths_csv = tmp_path / "paths.csv"
    series_csv = tmp_path / "series.csv"
    code, _, err = _run(
        capsys,
        [
            "simulate", "--config", "scalar-sc1", "--grid", "1024",
            "--paths", "16", "--dt", str(1.0 / 64), "--horizon-periods", "3",
            "--burn-in-periods", "1", "--batches", "4", "--seed", "1",
            "--snapshot-stride", "8", "--paths-out", str(paths_csv),
            "--format", "csv", "--out", str(series_csv),
        ],
    )
    assert code == 0, err
    lines = series_csv.read_text().strip().splitlines()
    assert lines[0] == "t,ensemble_cost"
    assert len(lines) == 1 + 3 * 64 + 1
    # repr round-trip: every numeric cell reparses to the identical float
    for line in lines[1:]:
        for cell in line.split(","):
            assert repr(float(cell)) == cell
    plines = paths_csv.read_text().strip().splitlines()
    assert plines[0] == "path_id,t,x1"
    assert len(plines) == 1 + 16 * (3 * 64 // 8 + 1)


def test_simulate_json_report(capsys):
    rep = _report(
        capsys,
        [
            "simulate", "--config", "scalar-sc1", "--grid", "1024",
            "--paths", "32", "--dt", str(1.0 / 64), "--horizon-periods", "4",
            "--burn-in-periods", "1", "--batches", "4", "--seed", "2",
        ],
    )
    cost = rep["outputs"]["cost"]
    assert cost["batches"] == 4
    assert cost["stderr"] > 0.0
    assert rep["outputs"]["x0"] == [0.0]


def test_measure_report(capsys):
    rep = _report(
        capsys,
        [
            "measure", "--config", "scalar-sc1", "--grid", "1024",
            "--paths", "48", "--dt", str(1.0 / 32), "--periods", "3",
            "--x0", "1.5", "--x-alt", "-2.0", "--seed", "3",
        ],
    )
    diag = rep["outputs"]["diagnostics"]
    assert len(diag["w2_consecutive"]) == 3
    assert diag["floor"] > 0.0
    assert diag["two_start_w2"] is not None


def test_example_routes(capsys):
    rep = _report(
        capsys,
        [
            "example", "--grid", "1024", "--paths", "128",
            "--dt", str(TAU / 256), "--horizon-periods", "20",
            "--burn-in-periods", "2", "--batches", "8",
        ],
    )
    routes = rep["outputs"]["routes"]
    assert routes["closed_form"]["passed"] is True
    assert routes["moment_route"]["passed"] is True
    assert rep["outputs"]["target"] == 8.5
    assert "monte_carlo" in routes


def test_parse_error_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "tau": oops\n}\n')
    code, _, err = _run(capsys, ["check", "--config", str(bad)])
    assert code == 2
    assert "line 2" in err


def test_missing_coefficient_message(capsys, tmp_path):
    doc = {
        "tau": 1.0, "n": 1, "m": 1,
        "coefficients": {"A": [[-1.0]], "B": [[1.0]], "Q": [[1.0]]},
    }
    path = tmp_path / "model.json"
    path.write_text(json.dumps(doc))
    code, _, err = _run(capsys, ["check", "--config", str(path)])
    assert code == 2
    assert "missing required coefficient 'R'" in err


def test_unknown_coefficient_rejected(capsys, tmp_path):
    doc = {
        "tau": 1.0, "n": 1, "m": 1,
        "coefficients": {
            "A": [[-1.0]], "B": [[1.0]], "Q": [[1.0]], "R": [[1.0]],
            "Z": [[0.0]],
        },
    }
    path = tmp_path / "model.json"
    path.write_text(json.dumps(doc))
    code, _, err = _run(capsys, ["check", "--config", str(path)])
    assert code == 2
    assert "unknown coefficients" in err


def test_trig_entry_config(capsys, tmp_path):
    # harmonic entries: A(t) = -2 + cos(2 pi t), scalar, stabilized by R=1
    doc = {
        "tau": 1.0, "n": 1, "m": 1, "name": "wobble",
        "coefficients": {
            "A": [[{"const": -2.0, "harmonics": [{"k": 1, "cos": 1.0}]}]],
            "B": [[1.0]],
            "Q": [[1.0]],
            "R": [[1.0]],
            "sigma": [0.5],
        },
    }
    path = tmp_path / "model.json"
    path.write_text(json.dumps(doc))
    rep = _report(capsys, ["synthesize", "--config", str(path), "--grid", "1024"])
    assert rep["outputs"]["model"] == "wobble"
    assert rep["outputs"]["value"]["value"] > 0.0


def test_x0_length_checked(capsys):
    code, _, err = _run(
        capsys,
        ["simulate", "--config", "scalar-sc1", "--x0", "1,2",
         "--paths", "4", "--dt", str(1.0 / 32), "--horizon-periods", "2",
         "--burn-in-periods", "0", "--batches", "2", "--grid", "1024"],
    )
    assert code == 2
    assert "--x0" in err


def test_unreadable_config_path(capsys, tmp_path):
    code, _, err = _run(
        capsys, ["check", "--config", str(tmp_path / "absent.json")]
    )
    assert code == 2
    assert "cannot read" in err
