import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mpimex import CoupledOdeSystem, Subsystem
from mpimex.cli import RunConfig, convergence_rows, format_value, main
from mpimex.errors import ContractViolation
from mpimex.problems.base import Problem


def _run(argv, tmp_path, name="out.csv"):
    out = tmp_path / name
    code = main(list(argv) + ["--out", str(out)])
    return code, out.read_bytes()


def _rows(data):
    return list(csv.DictReader(io.StringIO(data.decode())))


def test_converge_linear3_imex2(tmp_path):
    code, data = _run(["converge", "--problem", "linear3", "--scheme", "imex2", "--predictor", "weak-jacobi",
                       "--dt-list", "0.2,0.1,0.05,0.025"], tmp_path)
    assert code == 0
    rows = _rows(data)
    assert [float(r["dt"]) for r in rows] == [0.2, 0.1, 0.05, 0.025]
    assert rows[0]["observed_slope"] == ""
    assert 1.7 <= float(rows[-1]["observed_slope"]) <= 2.3


def test_converge_stage_variant(tmp_path):
    code, data = _run(["converge", "--problem", "linear3", "--scheme", "imex3", "--predictor", "stage-variant",
                       "--dt-list", "0.2,0.1,0.05,0.025"], tmp_path)
    assert code == 0
    assert 1.7 <= float(_rows(data)[-1]["observed_slope"]) <= 2.3


def test_zero_velocity_errors_vanish():
    sys_ = CoupledOdeSystem([Subsystem("z", 2, 1, lambda u, c, t: np.zeros(2))], lambda i, p, t: np.zeros(1))
    prob = Problem(name="zero", system=sys_, u0=np.array([1.0, -2.0]), t_final=1.0, blocks={"z": [0]},
                   exact=lambda t: np.array([1.0, -2.0]))
    rows = convergence_rows(prob, "imex3", "weak-gs", [0.5, 0.25, 0.125])
    assert all(r["error"] == 0.0 for r in rows)


def test_divergent_rows(tmp_path):
    # weak Jacobi imex1 blows up at alpha = 1, dt = 10 on model2
    code, data = _run(["converge", "--problem", "model2", "--scheme", "imex1", "--predictor", "weak-jacobi",
                       "--dt-list", "10", "--t-final", "100000", "--param", "alpha=1.0",
                       "--reference-scheme", "imex1", "--reference-dt", "10", "--reference-predictor",
                       "strong-gs"], tmp_path)
    assert code == 1
    assert _rows(data)[0]["error"] == "inf"


def test_stability_strong_gs_all_stable(tmp_path):
    code, data = _run(["stability", "--problem", "model2", "--scheme", "imex1", "--predictor", "strong-gs",
                       "--dt-list", "1000,10,0.1", "--alpha=-2,0,1,10"], tmp_path)
    assert code == 0
    rows = _rows(data)
    assert len(rows) == 12 and all(r["stable"] == "true" for r in rows)


def test_stability_weak_jacobi_unstable(tmp_path):
    code, data = _run(["stability", "--problem", "model2", "--scheme", "imex1", "--predictor", "weak-jacobi",
                       "--dt-list", "1000,10,0.1", "--alpha", "0.5"], tmp_path)
    assert any(r["stable"] == "false" for r in _rows(data))


def test_stability_empty_grid(tmp_path):
    code, data = _run(["stability", "--problem", "model2", "--dt-list", ""], tmp_path)
    assert code == 0
    assert data == b"scheme,predictor,dt,lambda1,lambda2,alpha,rho,stable,error\n"


def test_run_piston(tmp_path):
    code, data = _run(["run", "--problem", "piston", "--scheme", "imex2", "--predictor", "strong-gs",
                       "--dt-list", "0.01", "--t-final", "1.0"], tmp_path)
    assert code == 0
    rows = _rows(data)
    assert len(rows) == 100
    disp = np.array([float(r["piston_displacement"]) for r in rows])
    assert disp.min() >= -0.4 and disp.max() <= 0.1


def test_run_predprey(tmp_path):
    code, data = _run(["run", "--problem", "predprey", "--scheme", "imex4", "--predictor", "weak-gs",
                       "--dt-list", "0.1", "--t-final", "1.0"], tmp_path)
    assert code == 0
    rows = _rows(data)
    assert len(rows) == 10 and all(math.isfinite(float(r["prey_max"])) for r in rows)


def test_run_header_only(tmp_path):
    code, data = _run(["run", "--problem", "model2", "--dt-list", "0.1", "--t-final", "0"], tmp_path)
    assert code == 0
    assert data == b"t,newton_iters,u1,u2\n"


def test_theorem_check_deterministic(tmp_path):
    args = ["theorem-check", "--n-list", "2,4", "--count", "10", "--seed", "5"]
    code_a, a = _run(args, tmp_path, "a.csv")
    code_b, b = _run(args, tmp_path, "b.csv")
    assert code_a == code_b == 0
    assert a == b
    assert b"\r" not in a


def test_converge_deterministic_with_threads(tmp_path, monkeypatch):
    args = ["converge", "--problem", "model2", "--scheme", "imex3", "--predictor", "weak-gs",
            "--dt-list", "0.5,0.25,0.125"]
    _, serial = _run(args, tmp_path, "s.csv")
    monkeypatch.setenv("MPIMEX_THREADS", "3")
    _, threaded = _run(args, tmp_path, "t.csv")
    assert serial == threaded


def test_tableau_check(tmp_path):
    code, data = _run(["tableau-check"], tmp_path)
    assert code == 0
    rows = _rows(data)
    assert [r["scheme"] for r in rows] == ["imex1", "imex2", "imex3", "imex4"]
    assert all(r["valid"] == "true" for r in rows)


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"problem": "linear3", "scheme": "imex3", "predictor": "strong-gs",
                               "dt-list": [0.2, 0.1]}))
    _, from_file = _run(["converge", "--config", str(cfg)], tmp_path, "a.csv")
    _, overridden = _run(["converge", "--config", str(cfg), "--scheme", "imex2"], tmp_path, "b.csv")
    _, direct = _run(["converge", "--problem", "linear3", "--scheme", "imex2", "--predictor", "strong-gs",
                      "--dt-list", "0.2,0.1"], tmp_path, "c.csv")
    assert from_file != overridden
    assert overridden == direct


def test_errors_exit_two(tmp_path, capsys):
    assert main(["converge", "--problem", "linear3", "--dt-list", "0.1,0.2", "--out", str(tmp_path / "x")]) == 2
    assert main(["run", "--problem", "linear3", "--param", "nope=1", "--dt-list", "0.1",
                 "--out", str(tmp_path / "y")]) == 2


def test_config_validation():
    with pytest.raises(ContractViolation):
        RunConfig(dt_list=[0.1, 0.1]).validate()
    with pytest.raises(ContractViolation):
        RunConfig(scheme="rk4").validate()
    with pytest.raises(ContractViolation):
        RunConfig(predictor="jacobi").validate()


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(float("nan")) == ""
    assert format_value(float("inf")) == "inf"
    assert format_value(True) == "true"
    assert format_value(3) == "3"


def test_console_script_runs():
    res = subprocess.run([sys.executable, "-m", "mpimex", "tableau-check", "--scheme", "imex1"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("scheme,order,stages")
