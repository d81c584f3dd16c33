"""Command-line experiments.

Every command reads an optional JSON config, writes its outputs plus the
fully resolved config and a ``summary.json`` into ``--out``, prints the
paths it wrote, and exits with status 0 iff every threshold declared under
``"thresholds"`` (``{"metric": [lo, hi]}``, ``null`` for an open end) holds.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .birth_death import bd_rates, bd_stationary, cost_curve_csv, exact_cost
from .dgm import DgmConfig, residual_mse, sample_simplex, train
from .errors import MFGError, OutOfRegimeError
from .export import svg_heatmap, svg_line_chart, table_csv
from .large_deviations import RateFunction, ld_consistency_check
from .model import ModelParams
from .network import ConstantPotential, PotentialNetwork
from .simulator import estimate_cost, propagation_error, simulate
from .strategies import MasterEquationProfile, StationaryProfile, TimeDependentProfile
from .systems import (
    StationarySolution,
    kolmogorov_forward,
    solve_stationary_closed_form,
    solve_stationary_fixed_point,
)

logger = logging.getLogger("ergodic_mfg")


class ConfigError(MFGError, ValueError):
    """Malformed or incomplete experiment configuration."""


DEFAULTS = {
    "solve-stationary": {
        "model": {},
        "solver": {"method": "auto", "tol": 1e-10, "max_iter": 500, "damping": 0.5},
    },
    "train-dgm": {
        "model": {},
        "dgm": {},
        "solution": None,
        "evaluation": {"samples": 1000, "seed": 12345},
    },
    "simulate": {
        "model": {},
        "network": None,
        "sim": {"n": 50, "T": 100.0, "burn_in": 0.0, "reps": 1, "seed": 0, "profile": "stationary",
                "init": "stationary", "grid_points": 101, "dt": 1e-3},
    },
    "compare": {
        "model": {},
        "network": None,
        "compare": {"ns": [8, 16, 32, 64, 128], "convention": "shared", "mean_field": "self_excluded",
                    "bins": 50},
    },
    "rate-function": {
        "model": {},
        "network": None,
        "ld": {"grid_size": 99, "quad_points": 8, "sets": [{"n": 400, "c": 0.8, "side": "ge"}]},
    },
    "chaos": {
        "model": {},
        "sim": {"ns": [16, 64, 256, 1024], "T": 2.0, "reps": 200, "seed": 0, "grid_points": 11,
                "init": "iid"},
    },
}

FREE_BLOCKS = {"model", "dgm"}  # validated by their own dataclasses


def _merge(defaults: dict, given: dict, where: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if key not in defaults and key != "thresholds":
            raise ConfigError(f"unknown key {where}{key!r}")
        if isinstance(defaults.get(key), dict) and key not in FREE_BLOCKS:
            if not isinstance(value, dict):
                raise ConfigError(f"{where}{key!r} must be an object")
            out[key] = _merge(defaults[key], value, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(command: str, given: dict, seed: int | None = None) -> dict:
    """Merge ``given`` into the command defaults, rejecting unknown keys."""
    cfg = _merge(DEFAULTS[command], given, "")
    cfg.setdefault("thresholds", {})
    cfg["model"] = ModelParams.from_dict(cfg["model"]).to_dict()
    if command == "train-dgm":
        cfg["dgm"] = DgmConfig.from_dict(cfg["dgm"]).to_dict()
        if seed is not None:
            cfg["dgm"]["seed"] = seed
    elif seed is not None and "sim" in cfg:
        cfg["sim"]["seed"] = seed
    for name, bounds in cfg["thresholds"].items():
        if not (isinstance(bounds, list) and len(bounds) == 2):
            raise ConfigError(f"threshold {name!r} must be [lo, hi]")
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def check_thresholds(metrics: dict, thresholds: dict) -> list:
    """Human-readable violations of ``{"metric": [lo, hi]}`` bounds."""
    bad = []
    for name, (lo, hi) in thresholds.items():
        if name not in metrics:
            bad.append(f"{name}: metric not produced by this command")
            continue
        value = metrics[name]
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            bad.append(f"{name}: value {value!r} is not a finite number")
        elif (lo is not None and value < lo) or (hi is not None and value > hi):
            bad.append(f"{name}: {value:.6g} outside [{lo}, {hi}]")
    return bad


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, command: str, cfg: dict, out: Path):
        self.command, self.cfg, self.out = command, cfg, out
        out.mkdir(parents=True, exist_ok=True)
        self.written = []
        self.write("config.resolved.json", json.dumps(cfg, indent=2, sort_keys=True) + "\n")

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text)
        self.written.append(path)
        return path

    def finish(self, metrics: dict) -> int:
        violations = check_thresholds(metrics, self.cfg["thresholds"])
        summary = {
            "command": self.command,
            "config_sha256": config_hash(self.cfg),
            "metrics": metrics,
            "thresholds": self.cfg["thresholds"],
            "violations": violations,
            "passed": not violations,
        }
        self.write("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
        for path in self.written:
            print(path)
        for v in violations:
            print(f"threshold violated: {v}", file=sys.stderr)
        return 0 if not violations else 1


# ---------------------------------------------------------------------------
# shared helpers


def _stationary(params: ModelParams, solver: dict | None = None):
    solver = solver or {"method": "auto", "tol": 1e-10, "max_iter": 500, "damping": 0.5}
    kwargs = {k: solver[k] for k in ("tol", "max_iter", "damping")}
    method = solver["method"]
    if method not in ("auto", "closed", "fixed_point"):
        raise ConfigError(f"solver.method must be auto, closed or fixed_point, got {method!r}")
    if method != "fixed_point" and params.d == 2 and (params.a_lo, params.a_hi) == (1.0, 3.0):
        try:
            return solve_stationary_closed_form(params.b, params.delta), "closed_form"
        except OutOfRegimeError:
            print("closed form out of regime; using the fixed-point solver", file=sys.stderr)
    elif method == "closed":
        raise ConfigError("the closed form needs d = 2 and rate bounds [1, 3]")
    return solve_stationary_fixed_point(params, **kwargs), "fixed_point"


def _load_potential(source, params: ModelParams, u_bar):
    """``"constant"`` gives the stationary potential; otherwise a network JSON path."""
    if source is None:
        raise ConfigError("this command needs a 'network' entry (path or \"constant\")")
    if source == "constant":
        return ConstantPotential(u_bar)
    data = json.loads(Path(source).read_text())
    net = PotentialNetwork.from_dict(data)
    if net.d != params.d:
        raise ConfigError(f"network is for d={net.d}, model has d={params.d}")
    return net


# ---------------------------------------------------------------------------
# commands


def cmd_solve_stationary(cfg, run: Run) -> dict:
    params = ModelParams.from_dict(cfg["model"])
    sol, method = _stationary(params, cfg["solver"])
    bellman, stationarity = sol.residuals(params)
    run.write("solution.json", sol.to_json() + "\n")
    delta_u = [float(v) for v in sol.u - sol.u[0]]
    print(f"rho = {sol.rho:.10g}")
    print(f"Delta u (from state 1) = {np.round(delta_u, 10).tolist()}")
    print(f"mu = {np.round(sol.mu, 10).tolist()}")
    return {
        "method": method,
        "rho": float(sol.rho),
        "gap": float(sol.u[-1] - sol.u[0]) if params.d == 2 else None,
        "delta_u": delta_u,
        "mu": [float(v) for v in sol.mu],
        "bellman_residual": bellman,
        "stationarity_residual": stationarity,
    }


def cmd_train_dgm(cfg, run: Run) -> dict:
    params = ModelParams.from_dict(cfg["model"])
    dcfg = DgmConfig.from_dict(cfg["dgm"])
    sol = None
    if cfg["solution"] is not None:
        sol = StationarySolution.from_json(Path(cfg["solution"]).read_text())
        if dcfg.rho is None:
            dcfg.rho = float(sol.rho)
    if dcfg.rho is None:
        raise ConfigError("training needs rho: set dgm.rho or point 'solution' at a solution file")
    if sol is None:
        sol, _ = _stationary(params)
    trained = train(dcfg, params)
    net = trained.network
    ev = cfg["evaluation"]
    mse = residual_mse(net, dcfg.rho, params, dcfg.h, ev["samples"], ev["seed"])
    fresh = sample_simplex(params.d, ev["samples"], ev["seed"] + 1)
    centralization = float(np.abs(net.potential(fresh).sum(axis=1)).max())
    U = net.potential(sol.mu)
    run.write("network.json", trained.to_json() + "\n")
    hist = [(dcfg.record_every * (k + 1) if k + 1 < len(trained.residual_history) else dcfg.iterations, v)
            for k, v in enumerate(trained.residual_history)]
    run.write("history.csv", table_csv(["iteration", "loss"], hist))
    metrics = {
        "residual_mse": float(mse),
        "final_loss": float(trained.final_loss),
        "best_loss": float(trained.best_loss),
        "centralization": centralization,
        "delta_u_at_mu_bar": [float(v) for v in U - U[0]],
        "delta_u_error": float(np.abs((U - U[0]) - (sol.u - sol.u[0])).max()),
    }
    print(f"residual MSE = {mse:.3e}, centralization = {centralization:.3e}")
    return metrics


def _profile(kind: str, params, sol, cfg):
    if kind == "stationary":
        return StationaryProfile(sol.u, params)
    if kind == "master":
        return MasterEquationProfile(_load_potential(cfg["network"], params, sol.u), params)
    if kind == "time_dependent":
        pot = _load_potential(cfg["network"], params, sol.u)
        init = _init_law(cfg["sim"]["init"], params, sol)
        path = kolmogorov_forward(init, lambda m: pot.potential(m), params, cfg["sim"]["T"], cfg["sim"]["dt"])
        return TimeDependentProfile(pot, path, params)
    raise ConfigError(f"sim.profile must be stationary, master or time_dependent, got {kind!r}")


def _init_law(init, params, sol):
    if init == "stationary":
        return np.asarray(sol.mu)
    if init == "uniform":
        return np.full(params.d, 1.0 / params.d)
    law = np.asarray(init, dtype=float)
    if law.shape != (params.d,):
        raise ConfigError("sim.init must be 'stationary', 'uniform' or a probability vector")
    return law


def cmd_simulate(cfg, run: Run) -> dict:
    params = ModelParams.from_dict(cfg["model"])
    sim = cfg["sim"]
    if sim["profile"] == "master" and sim["n"] < 2:
        raise ConfigError("the master-equation profile needs n >= 2")
    sol, _ = _stationary(params)
    profile = _profile(sim["profile"], params, sol, cfg)
    law = _init_law(sim["init"], params, sol)
    first = simulate(sim["n"], profile, sim["T"], law, sim["seed"], 0, burn_in=sim["burn_in"],
                     grid_points=sim["grid_points"], record_jumps=False)
    run.write("path.csv", first.path_csv())
    run.write("players.csv", first.cost_csv())
    est = estimate_cost(sim["n"], profile, sim["T"], sim["burn_in"], sim["reps"], sim["seed"], law)
    rows = [[r, float(v)] for r, v in enumerate(est.samples)]
    rows += [["mean", est.mean], ["stderr", est.stderr]]
    run.write("costs.csv", table_csv(["rep", "cost"], rows))
    print(f"mean cost = {est.mean:.6f} (stderr {est.stderr:.2e})")
    return {"mean_cost": est.mean, "stderr": est.stderr, "jumps_rep0": first.jumps}


def cmd_compare(cfg, run: Run) -> dict:
    params = ModelParams.from_dict(cfg["model"])
    if params.d != 2:
        raise ConfigError("the exact comparison is available for d = 2 only")
    cmp = cfg["compare"]
    sol, _ = _stationary(params)
    bar = StationaryProfile(sol.u, params)
    zero = MasterEquationProfile(_load_potential(cfg["network"], params, sol.u), params)
    ns = [int(n) for n in cmp["ns"]]
    rho_bar = [exact_cost(n, bar, cmp["convention"], cmp["mean_field"]) for n in ns]
    rho_zero = [exact_cost(n, zero, cmp["convention"], cmp["mean_field"]) for n in ns]
    run.write("costs.csv", cost_curve_csv(ns, rho_bar, rho_zero))
    diff = np.array(rho_bar) - np.array(rho_zero)

    bins = cmp["bins"]
    edges = np.linspace(0.0, 1.0, bins + 1)
    heat, rows = [], []
    for n in ns:
        for name, prof in (("stationary", bar), ("master", zero)):
            probs = bd_stationary(bd_rates(n, prof, cmp["convention"])).probs
            rows += [[n, name, k, float(p)] for k, p in enumerate(probs)]
            if name == "master":
                idx = np.minimum(np.searchsorted(edges, np.arange(n + 1) / n, side="right") - 1, bins - 1)
                heat.append(np.bincount(idx, weights=probs, minlength=bins))
    run.write("counts.csv", table_csv(["n", "profile", "k", "prob"], rows))
    run.write("costs.svg", svg_line_chart({"stationary": (ns, rho_bar), "master": (ns, rho_zero)},
                                          "Exact realized cost", "n", "cost", logx=True))
    run.write("difference.svg", svg_line_chart({"stationary - master": (ns, diff)},
                                               "Cost difference", "n", "difference", logx=True))
    run.write("counts.svg", svg_heatmap(np.array(heat), ns, "Stationary law of the fraction in state 1",
                                        "fraction in state 1", "n"))
    return {
        "ns": ns,
        "rho_stationary": rho_bar,
        "rho_master": rho_zero,
        "difference": diff.tolist(),
        "min_difference": float(diff.min()),
    }


def cmd_rate_function(cfg, run: Run) -> dict:
    params = ModelParams.from_dict(cfg["model"])
    if params.d != 2:
        raise ConfigError("the explicit rate function is available for d = 2 only")
    ld = cfg["ld"]
    sol, _ = _stationary(params)
    bar = RateFunction(StationaryProfile(sol.u, params))
    grid = np.linspace(0.0, 1.0, ld["grid_size"] + 2)[1:-1]
    s_bar = np.asarray(bar(grid))
    lam_ratio = bar.ratio
    closed = (np.log1p(-grid) + grid * np.log(grid / (1 - grid)) + grid * math.log(lam_ratio)
              - (math.log(lam_ratio) - math.log(lam_ratio + 1)))
    metrics = {
        "closed_form_max_error": float(np.abs(s_bar - closed).max()),
        "min_s_stationary": float(s_bar.min()),
        "argmin_stationary": bar.argmin,
    }
    series = {"stationary": (grid, s_bar)}
    header, cols = ["eta1", "s_stationary"], [grid, s_bar]
    if cfg["network"] is not None:
        zero = RateFunction(MasterEquationProfile(_load_potential(cfg["network"], params, sol.u), params),
                            quad_points=ld["quad_points"])
        s_zero = np.asarray(zero(grid))
        d = s_bar - s_zero
        series["master"] = (grid, s_zero)
        header += ["s_master", "difference"]
        cols += [s_zero, d]
        metrics.update({
            "min_s_master": float(s_zero.min()),
            "argmin_master": zero.argmin,
            "max_abs_difference": float(np.abs(d).max()),
            "argmax_abs_difference": float(grid[np.argmax(np.abs(d))]),
        })
        run.write("difference.svg", svg_line_chart({"stationary - master": (grid, d)},
                                                   "Rate function difference", "eta_1", "difference"))
    run.write("rate_function.csv", table_csv(header, np.column_stack(cols).tolist()))
    run.write("rate_function.svg", svg_line_chart(series, "Stationary rate function", "eta_1", "s"))
    checks = []
    for k, item in enumerate(ld["sets"]):
        extra = set(item) - {"n", "c", "side"}
        if extra:
            raise ConfigError(f"unknown keys in ld.sets[{k}]: {sorted(extra)}")
        chk = ld_consistency_check(StationaryProfile(sol.u, params), int(item["n"]), float(item["c"]),
                                   item.get("side", "ge"), rate=bar)
        checks.append({"n": chk.n, "c": chk.threshold, "side": chk.side,
                       "empirical": chk.empirical, "rate_inf": chk.rate_inf,
                       "relative_gap": chk.relative_gap})
    metrics["ld_checks"] = checks
    if checks:
        metrics["ld_max_relative_gap"] = max(c["relative_gap"] for c in checks)
    return metrics


def cmd_chaos(cfg, run: Run) -> dict:
    params = ModelParams.from_dict(cfg["model"])
    sim = cfg["sim"]
    sol, _ = _stationary(params)
    rep = propagation_error(sim["ns"], StationaryProfile(sol.u, params), sol.mu, sim["T"], sim["reps"],
                            sim["seed"], sim["grid_points"], sim["init"])
    run.write("chaos.csv", rep.to_csv())
    run.write("chaos.svg", svg_line_chart({"sup_t E|mu_t - mu|": (rep.ns, rep.sup_errors)},
                                          "Propagation of chaos", "n", "error", logx=True, logy=True))
    if rep.slope is None:
        print("single population size: no slope fitted")
    else:
        print(f"log-log slope = {rep.slope:.4f}")
    return {"ns": rep.ns.tolist(), "sup_errors": rep.sup_errors.tolist(), "slope": rep.slope}


COMMANDS = {
    "solve-stationary": cmd_solve_stationary,
    "train-dgm": cmd_train_dgm,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "rate-function": cmd_rate_function,
    "chaos": cmd_chaos,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergodic-mfg", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--seed", type=int, help="overrides the seed in the config")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        given = json.loads(args.config.read_text()) if args.config else {}
        if not isinstance(given, dict):
            raise ConfigError("the config file must hold a JSON object")
        cfg = resolve_config(args.command, given, args.seed)
        run = Run(args.command, cfg, args.out)
        metrics = COMMANDS[args.command](cfg, run)
        return run.finish(metrics)
    except (MFGError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
