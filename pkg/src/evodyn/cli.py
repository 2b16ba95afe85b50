"""Config-driven experiment runner: simulate, verify, refine.

A single JSON config describes the game, grid, protocol, initial state,
feedback mode, and time stepping. Unknown config keys are hard errors so
typos cannot silently change an experiment. Exit codes: 0 success (all
requested checks passed), 1 validation error or failed check, 2 numerical
failure (mass guard or non-finite field).

simulate writes trajectory.csv (t plus CDF columns s_1..s_n),
diagnostics.csv (t, nash_gap, storage, sigma, mass_error), summary.json,
and metadata.json with the fully resolved config. Floats are printed with
17 significant digits so identical configs reproduce byte-identical CSVs.
"""

import argparse
import json
import sys
import time as _time
from pathlib import Path

import numpy as np

import evodyn
from evodyn import diagnostics, games
from evodyn._core import kernel_backend
from evodyn.approximation import refine_study, write_refine_csv
from evodyn.dynamics import (
    FieldNumericsError,
    MassGuardError,
    SmoothingConfig,
    bnn,
    sign_preservation_check,
    simulate_dpedm,
    simulate_edm,
    smith,
)
from evodyn.measures import (
    DiscreteMeasure,
    PayoffVector,
    cdf,
    dirac,
    gaussian_on_grid,
    uniform_measure,
)
from evodyn.strategy_space import (
    make_reference,
    make_uniform_grid,
    make_uniform_reference,
)


class ConfigError(ValueError):
    """Invalid or unknown configuration entry; message names the key."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# config schema: nested allowed-key trees; leaves are None


THETA_KEYS = {"kind": None, "alpha": None, "x0": None}
GAME_KEYS = {"kind": None, "V": None, "theta": THETA_KEYS, "path": None}
GRID_KEYS = {"n": None, "lower": None, "upper": None}
GRID_BOUNDS_KEYS = {"lower": None, "upper": None}
REFERENCE_KEYS = {"mode": None, "values": None}
PROTOCOL_KEYS = {"kind": None}
INITIAL_KEYS = {"kind": None, "mean": None, "variance": None, "s": None,
                "path": None}
RHO0_KEYS = {"kind": None, "path": None}
FEEDBACK_KEYS = {"mode": None, "lambda_s": None, "rho0": RHO0_KEYS}
TIME_KEYS = {"t_end": None, "dt": None, "method": None, "sample_every": None}
CANDIDATE_KEYS = {"kind": None, "path": None, "s": None, "tol": None}

SIMULATE_SCHEMA = {
    "game": GAME_KEYS,
    "grid": GRID_KEYS,
    "reference": REFERENCE_KEYS,
    "protocol": PROTOCOL_KEYS,
    "initial_state": INITIAL_KEYS,
    "feedback": FEEDBACK_KEYS,
    "time": TIME_KEYS,
    "seed": None,
    "output_dir": None,
}

VERIFY_SCHEMA = {
    "game": GAME_KEYS,
    "grid": GRID_KEYS,
    "reference": REFERENCE_KEYS,
    "protocol": PROTOCOL_KEYS,
    "initial_state": INITIAL_KEYS,
    "time": TIME_KEYS,
    "checks": None,
    "trials": None,
    "candidate": CANDIDATE_KEYS,
    "seed": None,
    "output_dir": None,
}

REFINE_SCHEMA = {
    "game": GAME_KEYS,
    "grid": GRID_BOUNDS_KEYS,
    "reference": REFERENCE_KEYS,
    "protocol": PROTOCOL_KEYS,
    "initial_state": INITIAL_KEYS,
    "time": TIME_KEYS,
    "ns": None,
    "horizon_samples": None,
    "seed": None,
    "output_dir": None,
}


def _check_keys(cfg, schema, prefix=""):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{prefix or 'config'} must be a JSON object")
    for key, value in cfg.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown key {path!r}")
        sub = schema[key]
        if sub is not None and isinstance(value, dict):
            _check_keys(value, sub, prefix=path + ".")
        elif sub is not None and not isinstance(value, dict):
            raise ConfigError(f"{path!r} must be a JSON object")


def _require(cfg, key, prefix=""):
    if key not in cfg:
        raise ConfigError(f"missing key {prefix}{key!r}")
    return cfg[key]


def _number(cfg, key, prefix, positive=False):
    val = _require(cfg, key, prefix)
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ConfigError(f"{prefix}{key} must be a number")
    if positive and val <= 0:
        raise ConfigError(f"{prefix}{key} must be positive")
    return float(val)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")


# ---------------------------------------------------------------------------
# builders


def build_grid(cfg) -> "evodyn.strategy_space.StrategyGrid":
    n = _require(cfg, "n", "grid.")
    if not isinstance(n, int) or n < 2:
        raise ConfigError("grid.n must be an integer >= 2")
    lower = _number(cfg, "lower", "grid.")
    upper = _number(cfg, "upper", "grid.")
    if lower >= upper:
        raise ConfigError("grid.lower must be below grid.upper")
    return make_uniform_grid(n, lower, upper)


def build_theta(cfg) -> games.ThetaSpec:
    kind = _require(cfg, "kind", "game.theta.")
    if kind == "logistic":
        return games.theta_logistic(_number(cfg, "alpha", "game.theta.",
                                             positive=True))
    if kind == "piecewise_linear":
        return games.theta_piecewise_linear(_number(cfg, "x0", "game.theta.",
                                                    positive=True))
    raise ConfigError(f"game.theta.kind {kind!r} not recognized")


def build_kernel(cfg, grid) -> games.PayoffKernel:
    kind = _require(cfg, "kind", "game.")
    try:
        if kind == "war_of_attrition":
            return games.kernel_war_of_attrition(
                _number(cfg, "V", "game.", positive=True), grid)
        if kind == "continuous_war":
            theta = build_theta(_require(cfg, "theta", "game."))
            return games.kernel_continuous_war(
                _number(cfg, "V", "game.", positive=True), theta, grid)
        if kind == "cosine":
            return games.kernel_cosine(grid)
        if kind == "table":
            return games.kernel_from_csv(_require(cfg, "path", "game."), grid)
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError(f"game: {exc}")
    raise ConfigError(f"game.kind {kind!r} not recognized")


def build_protocol(cfg):
    kind = _require(cfg, "kind", "protocol.")
    if kind == "bnn":
        return bnn()
    if kind == "smith":
        return smith()
    raise ConfigError(f"protocol.kind {kind!r} not recognized "
                      "(configs support 'bnn' and 'smith')")


def build_reference(cfg, grid):
    mode = _require(cfg, "mode", "reference.")
    if mode == "uniform":
        return make_uniform_reference(grid)
    if mode == "weights":
        values = _require(cfg, "values", "reference.")
        try:
            return make_reference(grid, values)
        except ValueError as exc:
            raise ConfigError(f"reference.values: {exc}")
    raise ConfigError(f"reference.mode {mode!r} not recognized")


def _load_vector(path, n, what):
    try:
        if str(path).endswith(".json"):
            with open(path) as fh:
                vec = np.asarray(json.load(fh), dtype=float)
        else:
            vec = np.loadtxt(path, dtype=float, ndmin=1)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{what}: cannot read {path}: {exc}")
    if vec.shape != (n,):
        raise ConfigError(f"{what}: expected {n} values, got {vec.shape}")
    return vec


def build_initial_state(cfg, grid) -> DiscreteMeasure:
    kind = _require(cfg, "kind", "initial_state.")
    try:
        if kind == "uniform":
            return uniform_measure(grid)
        if kind == "gaussian":
            return gaussian_on_grid(grid,
                                    _number(cfg, "mean", "initial_state."),
                                    _number(cfg, "variance", "initial_state.",
                                            positive=True))
        if kind == "dirac":
            s = _number(cfg, "s", "initial_state.")
            return dirac(grid, int(np.argmin(np.abs(grid.points - s))))
        if kind == "file":
            w = _load_vector(_require(cfg, "path", "initial_state."), grid.n,
                             "initial_state")
            return DiscreteMeasure(grid, w / w.sum())
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"initial_state: {exc}")
    raise ConfigError(f"initial_state.kind {kind!r} not recognized")


def build_rho0(cfg, grid, kernel, x0) -> PayoffVector:
    kind = _require(cfg, "kind", "feedback.rho0.")
    if kind == "from-game":
        return games.evaluate_payoffs(kernel, x0)
    if kind == "quadratic":
        return PayoffVector(grid, -grid.points ** 2)
    if kind == "file":
        vals = _load_vector(_require(cfg, "path", "feedback.rho0."), grid.n,
                            "feedback.rho0")
        return PayoffVector(grid, vals)
    raise ConfigError(f"feedback.rho0.kind {kind!r} not recognized")


def build_time(cfg):
    t_end = _number(cfg, "t_end", "time.", positive=True)
    dt = _number(cfg, "dt", "time.", positive=True)
    method = cfg.get("method", "rk4")
    if method not in ("euler", "rk4"):
        raise ConfigError("time.method must be 'euler' or 'rk4'")
    sample_every = cfg.get("sample_every", 1)
    if not isinstance(sample_every, int) or sample_every < 1:
        raise ConfigError("time.sample_every must be an integer >= 1")
    return t_end, dt, method, sample_every


# ---------------------------------------------------------------------------
# outputs


def write_trajectory_csv(trajectory, path) -> None:
    n = trajectory.grid.n
    with open(path, "w", newline="") as fh:
        fh.write("t," + ",".join(f"s_{i + 1}" for i in range(n)) + "\n")
        for t, state in zip(trajectory.times, trajectory.states):
            row = cdf(state)
            fh.write(_fmt(t) + "," + ",".join(_fmt(v) for v in row) + "\n")


def write_diagnostics_csv(trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t,nash_gap,storage,sigma,mass_error\n")
        for k, t in enumerate(trajectory.times):
            fh.write(",".join([
                _fmt(t),
                _fmt(trajectory.nash_gap[k]),
                _fmt(trajectory.storage[k]),
                _fmt(trajectory.sigma[k]),
                _fmt(trajectory.mass_error[k]),
            ]) + "\n")


def write_metadata(config, out_dir, extra=None) -> None:
    meta = {
        "version": evodyn.__version__,
        "kernel_backend": kernel_backend(),
        "conventions": {"war_nash_binning": games.BINNING_CONVENTION},
        "config": config,
    }
    if extra:
        meta.update(extra)
    with open(Path(out_dir) / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(config, args) -> Path:
    out = args.out or config.get("output_dir")
    if not out:
        raise ConfigError("no output directory (set output_dir or pass --out)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(config, args) -> int:
    _check_keys(config, SIMULATE_SCHEMA)
    grid = build_grid(_require(config, "grid"))
    kernel = build_kernel(_require(config, "game"), grid)
    protocol = build_protocol(_require(config, "protocol"))
    lam = build_reference(config.get("reference", {"mode": "uniform"}), grid)
    x0 = build_initial_state(_require(config, "initial_state"), grid)
    t_end, dt, method, sample_every = build_time(_require(config, "time"))
    out = _out_dir(config, args)

    feedback = config.get("feedback", {"mode": "static"})
    mode = _require(feedback, "mode", "feedback.")
    started = _time.perf_counter()
    if mode == "static":
        trajectory = simulate_edm(kernel, protocol, lam, x0, t_end, dt,
                                  sample_every=sample_every, method=method)
    elif mode == "smoothing":
        smoothing = SmoothingConfig(_number(feedback, "lambda_s", "feedback.",
                                            positive=True))
        rho0 = build_rho0(_require(feedback, "rho0", "feedback."), grid,
                          kernel, x0)
        trajectory = simulate_dpedm(kernel, protocol, lam, smoothing, x0, rho0,
                                    t_end, dt, sample_every=sample_every,
                                    method=method)
    else:
        raise ConfigError(f"feedback.mode {mode!r} not recognized")
    wall = _time.perf_counter() - started

    write_trajectory_csv(trajectory, out / "trajectory.csv")
    write_diagnostics_csv(trajectory, out / "diagnostics.csv")
    summary = {
        "final_nash_gap": float(trajectory.nash_gap[-1]),
        "final_storage": float(trajectory.storage[-1]),
        "mass_error_max": float(np.max(trajectory.mass_error)),
        "wall_time_s": wall,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_metadata(config, out)
    print(f"simulate: wrote {out}/trajectory.csv "
          f"({len(trajectory.times)} samples, n={grid.n}, "
          f"final nash gap {trajectory.nash_gap[-1]:.3e})")
    return 0


def _verify_monotonicity(kernel, trials, seed, results):
    report = games.monotonicity_test(kernel, trials, seed)
    detail = {"max_value": report.max_value}
    if report.violating_pair is not None:
        mu, nu = report.violating_pair
        detail["witness_mu"] = mu.weights.tolist()
        detail["witness_nu"] = nu.weights.tolist()
    results.append(("monotonicity", report.monotone, detail))


def _verify_sign_preservation(protocol, trials, seed, results):
    if not protocol.is_pairwise:
        raise ConfigError("sign_preservation check needs a pairwise protocol")
    ok = sign_preservation_check(protocol, trials, seed)
    results.append(("sign_preservation", ok, {}))


def _verify_nash_candidate(config, kernel, grid, results):
    cand_cfg = config.get("candidate", {"kind": "war_closed_form"})
    kind = _require(cand_cfg, "kind", "candidate.")
    if kind == "war_closed_form":
        v_param = kernel.params.get("V")
        if v_param is None:
            raise ConfigError("candidate.kind war_closed_form needs a war game")
        candidate = games.war_nash_equilibrium(v_param, grid)
    elif kind == "uniform":
        candidate = uniform_measure(grid)
    elif kind == "dirac":
        s = _number(cand_cfg, "s", "candidate.")
        candidate = dirac(grid, int(np.argmin(np.abs(grid.points - s))))
    elif kind == "file":
        w = _load_vector(_require(cand_cfg, "path", "candidate."), grid.n,
                         "candidate")
        candidate = DiscreteMeasure(grid, w / w.sum())
    else:
        raise ConfigError(f"candidate.kind {kind!r} not recognized")
    tol = cand_cfg.get("tol", 1e-2)
    rho = games.evaluate_payoffs(kernel, candidate)
    gap = diagnostics.nash_gap(candidate, rho)
    check = diagnostics.nash_check(candidate, rho, tol=tol)
    results.append(("nash_candidate", gap <= tol,
                    {"gap": gap, "tol": tol, "support_check": check.ok}))


def _verify_storage_trace(config, kernel, protocol, lam, grid, results):
    x0 = build_initial_state(_require(config, "initial_state"), grid)
    t_end, dt, method, sample_every = build_time(_require(config, "time"))
    trajectory = simulate_edm(kernel, protocol, lam, x0, t_end, dt,
                              sample_every=sample_every, method=method)
    report = diagnostics.storage_trace_check(trajectory, protocol, kernel, lam)
    ok = report.max_increase <= 1e-6
    results.append(("storage_trace", ok,
                    {"max_increase": report.max_increase,
                     "energy_balance_residual": report.energy_balance_residual}))


def cmd_verify(config, args) -> int:
    _check_keys(config, VERIFY_SCHEMA)
    grid = build_grid(_require(config, "grid"))
    kernel = build_kernel(_require(config, "game"), grid)
    protocol = build_protocol(_require(config, "protocol"))
    lam = build_reference(config.get("reference", {"mode": "uniform"}), grid)
    checks = _require(config, "checks")
    if not isinstance(checks, list) or not checks:
        raise ConfigError("checks must be a non-empty list")
    trials = config.get("trials", 1000)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("trials must be a positive integer")
    seed = int(config.get("seed", 0))

    results = []
    for name in checks:
        if name == "monotonicity":
            _verify_monotonicity(kernel, trials, seed, results)
        elif name == "sign_preservation":
            _verify_sign_preservation(protocol, trials, seed, results)
        elif name == "nash_candidate":
            _verify_nash_candidate(config, kernel, grid, results)
        elif name == "storage_trace":
            _verify_storage_trace(config, kernel, protocol, lam, grid, results)
        else:
            raise ConfigError(f"unknown check {name!r}")

    for name, ok, detail in results:
        extras = ", ".join(f"{k}={v:.6g}" for k, v in detail.items()
                           if isinstance(v, (int, float))
                           and not isinstance(v, bool))
        print(f"{name}: {'PASS' if ok else 'FAIL'}"
              + (f" ({extras})" if extras else ""))
    if args.out or config.get("output_dir"):
        out = _out_dir(config, args)
        payload = {name: {"pass": ok, **detail} for name, ok, detail in results}
        with open(out / "report.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=list)
            fh.write("\n")
        write_metadata(config, out)
    return 0 if all(ok for _, ok, _ in results) else 1


def cmd_refine(config, args) -> int:
    _check_keys(config, REFINE_SCHEMA)
    grid_cfg = _require(config, "grid")
    lower = _number(grid_cfg, "lower", "grid.")
    upper = _number(grid_cfg, "upper", "grid.")
    if lower >= upper:
        raise ConfigError("grid.lower must be below grid.upper")
    ns = _require(config, "ns")
    if (not isinstance(ns, list) or len(ns) < 2
            or not all(isinstance(n, int) and n >= 2 for n in ns)):
        raise ConfigError("ns must be a list of at least two integers >= 2")
    protocol = build_protocol(_require(config, "protocol"))
    t_end, dt, method, _ = build_time(_require(config, "time"))
    horizon_samples = config.get("horizon_samples", 50)
    if not isinstance(horizon_samples, int) or horizon_samples < 1:
        raise ConfigError("horizon_samples must be a positive integer")
    game_cfg = _require(config, "game")
    init_cfg = _require(config, "initial_state")
    ref_cfg = config.get("reference", {"mode": "uniform"})
    out = _out_dir(config, args)

    report = refine_study(
        lambda grid: build_kernel(game_cfg, grid),
        protocol, ns,
        lambda grid: build_initial_state(init_cfg, grid),
        t_end, dt, horizon_samples,
        lower=lower, upper=upper,
        reference_family=lambda grid: build_reference(ref_cfg, grid),
        method=method, jobs=args.jobs,
    )
    write_refine_csv(report, out / "refine.csv")
    write_metadata(config, out)
    for row in report.rows:
        print(f"refine: n {row.n_coarse} -> {row.n_fine}: "
              f"sup BL {row.sup_bl:.6e} at t={row.t_of_max:g}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="evodyn",
        description="Evolutionary game dynamics on discretized strategy sets")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
            ("simulate", "run one experiment and write trajectory CSVs"),
            ("verify", "run property checks from a config"),
            ("refine", "grid-refinement convergence study")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel runs (refine only)")
        p.add_argument("--seed", type=int, default=None,
                       help="seed override")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if args.seed is not None:
            config["seed"] = args.seed
        if args.command == "simulate":
            return cmd_simulate(config, args)
        if args.command == "verify":
            return cmd_verify(config, args)
        return cmd_refine(config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (MassGuardError, FieldNumericsError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
