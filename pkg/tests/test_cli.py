import json

import numpy as np
import pytest

from ergodic_mfg.cli import ConfigError, check_thresholds, main, resolve_config


def run(tmp_path, command, config=None, *extra):
    tmp_path.mkdir(parents=True, exist_ok=True)
    out = tmp_path / command
    argv = [command, "--out", str(out), *extra]
    if config is not None:
        path = tmp_path / f"{command}.json"
        path.write_text(json.dumps(config))
        argv += ["--config", str(path)]
    return main(argv), out


def summary(out):
    return json.loads((out / "summary.json").read_text())


def test_solve_stationary(tmp_path, capsys):
    code, out = run(tmp_path, "solve-stationary", {"model": {"delta": 1.0}})
    assert code == 0
    m = summary(out)["metrics"]
    assert m["rho"] == pytest.approx(4209 / 4225)
    assert m["delta_u"][1] == pytest.approx(-16 / 65)
    assert m["method"] == "closed_form"
    assert "rho = 0.99621" in capsys.readouterr().out
    resolved = json.loads((out / "config.resolved.json").read_text())
    assert resolved["model"]["b"] == 4.0 and resolved["solver"]["tol"] == 1e-10


def test_solve_stationary_three_states(tmp_path):
    code, out = run(tmp_path, "solve-stationary", {"model": {"d": 3, "delta": 1.0}})
    assert code == 0
    assert summary(out)["metrics"]["method"] == "fixed_point"


def test_thresholds_drive_the_exit_code(tmp_path, capsys):
    ok, _ = run(tmp_path, "solve-stationary", {"thresholds": {"rho": [0.49, 0.51]}})
    assert ok == 0
    bad, out = run(tmp_path, "solve-stationary", {"thresholds": {"rho": [None, 0.4]}})
    assert bad == 1
    assert summary(out)["passed"] is False
    assert "threshold violated" in capsys.readouterr().err
    assert check_thresholds({"a": 1.0}, {"b": [0, 1]}) == ["b: metric not produced by this command"]


def test_unknown_keys_are_rejected(tmp_path, capsys):
    code, _ = run(tmp_path, "solve-stationary", {"solver": {"tolerance": 1}})
    assert code == 2
    assert "unknown key" in capsys.readouterr().err
    with pytest.raises(Exception):
        resolve_config("simulate", {"model": {"gamma": 1}})
    with pytest.raises(ConfigError):
        resolve_config("simulate", {"extra": 1})


def test_train_needs_rho(tmp_path, capsys):
    code, _ = run(tmp_path, "train-dgm", {"dgm": {"iterations": 10}})
    assert code == 2
    assert "rho" in capsys.readouterr().err


def test_train_is_deterministic(tmp_path):
    cfg = {"dgm": {"rho": 0.5, "iterations": 60, "batch_size": 16, "hidden": [8, 8], "record_every": 20,
                   "validation_size": 50}, "evaluation": {"samples": 50}}
    code_a, a = run(tmp_path / "a", "train-dgm", cfg, "--seed", "7")
    code_b, b = run(tmp_path / "b", "train-dgm", cfg, "--seed", "7")
    assert code_a == code_b == 0
    assert (a / "history.csv").read_bytes() == (b / "history.csv").read_bytes()
    assert (a / "network.json").read_bytes() == (b / "network.json").read_bytes()
    lines = (a / "history.csv").read_text().splitlines()
    assert lines[0] == "iteration,loss" and [l.split(",")[0] for l in lines[1:]] == ["20", "40", "60"]
    assert json.loads((a / "network.json").read_text())["training"]["seed"] == 7


def test_train_reads_solution_file(tmp_path):
    _, sol_dir = run(tmp_path, "solve-stationary", {"model": {"delta": 1.0}})
    cfg = {"model": {"delta": 1.0}, "solution": str(sol_dir / "solution.json"),
           "dgm": {"iterations": 20, "batch_size": 8, "hidden": [4], "record_every": 10, "validation_size": 20},
           "evaluation": {"samples": 20}}
    code, out = run(tmp_path, "train-dgm", cfg)
    assert code == 0
    assert json.loads((out / "network.json").read_text())["training"]["config"]["rho"] == pytest.approx(4209 / 4225)


def test_simulate_outputs(tmp_path):
    cfg = {"sim": {"n": 10, "T": 5.0, "reps": 3, "grid_points": 6}}
    code, out = run(tmp_path, "simulate", cfg)
    assert code == 0
    assert len((out / "path.csv").read_text().splitlines()) == 7
    costs = (out / "costs.csv").read_text().splitlines()
    assert costs[0] == "rep,cost" and costs[-2].startswith("mean,") and costs[-1].startswith("stderr,")
    assert len((out / "players.csv").read_text().splitlines()) == 11


def test_simulate_master_profile_validation(tmp_path, capsys):
    code, _ = run(tmp_path, "simulate", {"sim": {"n": 1, "profile": "master"}, "network": "constant"})
    assert code == 2
    code, _ = run(tmp_path, "simulate", {"sim": {"n": 5, "T": 1.0, "profile": "master"}})
    assert code == 2
    code, _ = run(tmp_path, "simulate", {"sim": {"n": 5, "T": 1.0, "profile": "master"}, "network": "constant"})
    assert code == 0


def test_simulate_time_dependent(tmp_path):
    cfg = {"sim": {"n": 20, "T": 1.0, "profile": "time_dependent", "init": [0.9, 0.1], "dt": 0.01},
           "network": "constant"}
    code, _ = run(tmp_path, "simulate", cfg)
    assert code == 0


def test_compare(tmp_path):
    cfg = {"model": {"delta": 1.0}, "network": "constant", "compare": {"ns": [4, 8], "bins": 5}}
    code, out = run(tmp_path, "compare", cfg)
    assert code == 0
    m = summary(out)["metrics"]
    assert np.allclose(m["rho_stationary"], 4209 / 4225, atol=1e-13)
    assert np.allclose(m["difference"], 0.0, atol=1e-13)
    for name in ("costs.csv", "counts.csv", "costs.svg", "difference.svg", "counts.svg"):
        assert (out / name).exists()
    assert (out / "costs.svg").read_text().startswith("<svg")


def test_compare_rejects_three_states(tmp_path, capsys):
    code, _ = run(tmp_path, "compare", {"model": {"d": 3}, "network": "constant"})
    assert code == 2
    assert "d = 2" in capsys.readouterr().err


def test_rate_function(tmp_path):
    cfg = {"model": {"delta": 1.0}, "network": "constant",
           "ld": {"grid_size": 19, "sets": [{"n": 100, "c": 0.8}]}}
    code, out = run(tmp_path, "rate-function", cfg)
    assert code == 0
    m = summary(out)["metrics"]
    assert m["closed_form_max_error"] < 1e-12
    assert m["argmin_stationary"] == pytest.approx(32 / 65)
    assert m["max_abs_difference"] < 1e-9
    assert len(m["ld_checks"]) == 1
    header = (out / "rate_function.csv").read_text().splitlines()[0]
    assert header == "eta1,s_stationary,s_master,difference"


def test_chaos_single_size(tmp_path, capsys):
    code, out = run(tmp_path, "chaos", {"sim": {"ns": [8], "reps": 5, "T": 0.5}})
    assert code == 0
    assert summary(out)["metrics"]["slope"] is None
    assert "no slope" in capsys.readouterr().out


def test_bad_config_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("[1, 2]")
    assert main(["solve-stationary", "--config", str(path), "--out", str(tmp_path / "x")]) == 2
    path.write_text("{not json")
    assert main(["solve-stationary", "--config", str(path), "--out", str(tmp_path / "x")]) == 2
