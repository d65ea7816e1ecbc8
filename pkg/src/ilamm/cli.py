"""Command-line front end: solve one problem from CSV data, run benchmark
scenarios, and export convergence traces as plot-ready CSV."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .core import (
    Coefficients,
    LossKind,
    PenaltyFamily,
    PenaltySpec,
    ProblemInstance,
    SolverConfig,
)
from .lamm import PhiState
from .penalties import adaptive_weights, uniform_weights
from .simbench import (
    DEFAULT_C_GRID,
    Design,
    DesignKind,
    KNOWN_METHODS,
    Scenario,
    ScenarioModel,
    cross_validate_lambda,
    default_lambda,
    run_benchmark,
)
from .solver import SubproblemDidNotConverge, solve_subproblem, solve_tac

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3

#: tolerance of the tight re-solve that estimates each stage's exact optimum
TRACE_REFERENCE_TOL = 1e-10


class CliError(Exception):
    def __init__(self, message, code=EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _fmt(x) -> str:
    """Round-trip-exact field formatting: 17 significant digits for floats."""
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _strict_keys(obj: dict, allowed, where: str):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise CliError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


_PENALTY_NAMES = {f.value: f for f in PenaltyFamily}
_LOSS_NAMES = {"squared": LossKind.SQUARED, "logistic": LossKind.LOGISTIC, "huber": LossKind.HUBER}


def _parse_loss(spec):
    if isinstance(spec, str):
        if spec not in _LOSS_NAMES:
            raise CliError(f"unknown loss {spec!r}")
        return _LOSS_NAMES[spec], None
    if isinstance(spec, dict):
        _strict_keys(spec, {"kind", "alpha"}, "loss")
        kind = spec.get("kind")
        if kind not in _LOSS_NAMES:
            raise CliError(f"unknown loss {kind!r}")
        return _LOSS_NAMES[kind], spec.get("alpha")
    raise CliError("loss must be a string or an object with kind/alpha")


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise CliError(f"could not parse {path}: {exc}")


_SOLVE_KEYS = {
    "loss", "penalty", "lambda", "cv", "phi0", "gamma_u",
    "eps_c", "eps_t", "t_max", "k_max", "seed",
}


def _parse_solve_config(raw: dict):
    _strict_keys(raw, _SOLVE_KEYS, "config")
    if "loss" not in raw or "penalty" not in raw:
        raise CliError("config needs both 'loss' and 'penalty'")
    loss_kind, alpha = _parse_loss(raw["loss"])
    pen = raw["penalty"]
    if not isinstance(pen, dict):
        raise CliError("penalty must be an object with family/a")
    _strict_keys(pen, {"family", "a"}, "penalty")
    family = _PENALTY_NAMES.get(pen.get("family"))
    if family is None:
        raise CliError(f"unknown penalty family {pen.get('family')!r}")
    if ("lambda" in raw) == ("cv" in raw):
        raise CliError("config needs exactly one of 'lambda' or 'cv'")
    cv = None
    if "cv" in raw:
        _strict_keys(raw["cv"], {"folds", "c_grid"}, "cv")
        cv = {
            "folds": int(raw["cv"].get("folds", 3)),
            "c_grid": list(raw["cv"].get("c_grid", DEFAULT_C_GRID)),
        }
    solver_kwargs = {}
    for src, dst in [("phi0", "phi0"), ("gamma_u", "gamma_u"), ("eps_c", "eps_c"),
                     ("eps_t", "eps_t"), ("t_max", "t_max"), ("k_max", "k_max")]:
        if src in raw:
            solver_kwargs[dst] = raw[src]
    return {
        "loss_kind": loss_kind,
        "huber_alpha": alpha,
        "family": family,
        "a": pen.get("a"),
        "lam": raw.get("lambda"),
        "cv": cv,
        "seed": int(raw.get("seed", 0)),
        "solver_kwargs": solver_kwargs,
    }


def _load_xy(x_path, y_path, loss_kind, alpha):
    try:
        X = np.loadtxt(x_path, delimiter=",", ndmin=2, dtype=float)
    except Exception as exc:
        raise CliError(f"could not parse {x_path}: {exc}")
    try:
        y = np.loadtxt(y_path, delimiter=",", ndmin=1, dtype=float)
    except Exception as exc:
        raise CliError(f"could not parse {y_path}: {exc}")
    if y.ndim != 1:
        raise CliError(f"y must be a single column, got shape {y.shape}")
    if X.shape[0] != y.shape[0]:
        raise CliError(
            f"X has {X.shape[0]} rows but y has {y.shape[0]} entries"
        )
    if loss_kind is LossKind.HUBER and alpha is None:
        alpha = default_lambda(X.shape[0], X.shape[1])
    try:
        return ProblemInstance(X=X, y=y, loss_kind=loss_kind, huber_alpha=alpha)
    except ValueError as exc:
        raise CliError(str(exc))


def _build_solver(parsed, instance):
    lam = parsed["lam"]
    if lam is None:
        lam, _ = cross_validate_lambda(
            instance,
            parsed["family"],
            parsed["cv"]["folds"],
            parsed["cv"]["c_grid"],
            parsed["seed"],
            SolverConfig(lam=1.0, **parsed["solver_kwargs"]),
        )
    penalty = PenaltySpec(parsed["family"], lam, parsed["a"])
    config = SolverConfig(lam=lam, **parsed["solver_kwargs"])
    return penalty, config


def _write_solve_outputs(outdir: Path, beta, meta):
    _write_csv(outdir / "coefficients.csv", ["index", "value"],
               [(j, float(v)) for j, v in enumerate(beta)])
    with open(outdir / "run_meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_solve(config_path, x_path, y_path, outdir: Path) -> int:
    parsed = _parse_solve_config(_load_json(config_path))
    instance = _load_xy(x_path, y_path, parsed["loss_kind"], parsed["huber_alpha"])
    penalty, config = _build_solver(parsed, instance)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        result = solve_tac(instance, penalty, config)
    except SubproblemDidNotConverge as exc:
        meta = {
            "converged": False,
            "non_converged": True,
            "stages_run": exc.trace.stage,
            "total_lamm_iterations": sum(r.k for r in [exc.trace.records[-1]]),
            "final_omega_per_stage": [exc.best_omega],
            "lambda": penalty.lam,
            "message": str(exc),
        }
        _write_solve_outputs(outdir, exc.best_beta.beta, meta)
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    meta = {
        "converged": True,
        "non_converged": False,
        "stages_run": result.stages_run,
        "total_lamm_iterations": result.total_lamm_iterations,
        "final_omega_per_stage": [t.records[-1].omega for t in result.traces],
        "lambda": penalty.lam,
    }
    _write_solve_outputs(outdir, result.final.beta, meta)
    return EXIT_OK


_SCENARIO_KEYS = {
    "model", "n", "d", "beta_star", "design", "sigma", "replicates",
    "base_seed", "methods", "cv", "solver",
}

_MODEL_NAMES = {m.value: m for m in ScenarioModel}
_DESIGN_NAMES = {k.value: k for k in DesignKind}


def _parse_beta_star(raw, d):
    if isinstance(raw, list):
        if len(raw) != d:
            raise CliError(f"beta_star has length {len(raw)}, expected d = {d}")
        return np.asarray(raw, dtype=float)
    if isinstance(raw, dict):
        _strict_keys(raw, {"nonzeros"}, "beta_star")
        beta = np.zeros(d)
        for k, v in raw.get("nonzeros", {}).items():
            j = int(k)
            if not 0 <= j < d:
                raise CliError(f"beta_star index {j} out of range")
            beta[j] = float(v)
        return beta
    raise CliError("beta_star must be a list or {'nonzeros': {...}}")


def _parse_scenario(raw: dict, seed_override=None):
    _strict_keys(raw, _SCENARIO_KEYS, "scenario")
    for key in ("model", "n", "d", "beta_star", "design", "methods"):
        if key not in raw:
            raise CliError(f"scenario needs key {key!r}")
    model = _MODEL_NAMES.get(raw["model"])
    if model is None:
        raise CliError(f"unknown model {raw['model']!r}")
    design_raw = raw["design"]
    _strict_keys(design_raw, {"kind", "rho"}, "design")
    kind = _DESIGN_NAMES.get(design_raw.get("kind"))
    if kind is None:
        raise CliError(f"unknown design kind {design_raw.get('kind')!r}")
    design = Design(kind, float(design_raw.get("rho", 0.0)))
    n, d = int(raw["n"]), int(raw["d"])
    methods = list(raw["methods"])
    for m in methods:
        if m not in KNOWN_METHODS:
            raise CliError(f"unknown method {m!r}")
    scenario = Scenario(
        model=model,
        n=n,
        d=d,
        beta_star=_parse_beta_star(raw["beta_star"], d),
        design=design,
        sigma=float(raw.get("sigma", 1.0)),
        replicates=int(raw.get("replicates", 100)),
        base_seed=int(seed_override if seed_override is not None else raw.get("base_seed", 0)),
    )
    cv = raw.get("cv", {})
    _strict_keys(cv, {"folds", "c_grid"}, "cv")
    folds = int(cv.get("folds", 3))
    c_grid = list(cv.get("c_grid", DEFAULT_C_GRID))
    solver_raw = raw.get("solver", {})
    _strict_keys(solver_raw, {"phi0", "gamma_u", "eps_c", "eps_t", "t_max", "k_max"}, "solver")
    config = SolverConfig(lam=1.0, **solver_raw) if solver_raw else None
    return scenario, methods, folds, c_grid, config


def cmd_bench(scenario_path, outdir: Path, threads: int = 1, seed=None) -> int:
    scenario, methods, folds, c_grid, config = _parse_scenario(_load_json(scenario_path), seed)
    summary = run_benchmark(scenario, methods, config, folds, c_grid, n_jobs=threads)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        outdir / "summary.csv",
        ["method", "median_mse", "median_tp", "median_fp", "median_time_s", "failures"],
        [
            (m.method, m.median_mse, m.median_tp, m.median_fp, m.median_time_s, m.failures)
            for m in summary.methods
        ],
    )
    _write_csv(
        outdir / "replicates.csv",
        ["replicate", "method", "mse", "tp", "fp", "time_s", "lambda", "status"],
        [
            (r.replicate, r.method, r.mse, r.tp, r.fp, r.time_s, r.lam, r.status)
            for r in summary.replicates
        ],
    )
    return EXIT_OK


def trace_rows(instance, penalty, config, reference_tol=TRACE_REFERENCE_TOL):
    """Per-iteration rows (stage, k, phi, F, omega, dist_to_stage_opt, log10_dist).

    Each stage's subproblem is re-solved to a much tighter suboptimality to
    estimate its exact optimum, against which iterate distances are measured.
    """
    result = solve_tac(instance, penalty, config, keep_iterates=True)
    cfg = config.resolved(instance.n, instance.d)
    rows = []
    for idx, trace in enumerate(result.traces):
        if idx == 0:
            weights = uniform_weights(cfg.lam, instance.d)
        else:
            weights = adaptive_weights(penalty, result.per_stage_estimates[idx - 1])
        ref, _, _ = solve_subproblem(
            instance,
            weights,
            result.per_stage_estimates[idx],
            reference_tol,
            PhiState(cfg.phi0),
            max(cfg.k_max, 200000),
            config=cfg,
            stage=trace.stage,
        )
        for rec, iterate in zip(trace.records, trace.iterates):
            dist = float(np.linalg.norm(iterate - ref.beta))
            log_dist = math.log10(max(dist, 1e-300))
            rows.append(
                (trace.stage, rec.k, rec.phi, rec.objective, rec.omega, dist, log_dist)
            )
    return rows, result


def cmd_trace(config_path, x_path, y_path, outdir: Path) -> int:
    parsed = _parse_solve_config(_load_json(config_path))
    instance = _load_xy(x_path, y_path, parsed["loss_kind"], parsed["huber_alpha"])
    penalty, config = _build_solver(parsed, instance)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        rows, result = trace_rows(instance, penalty, config)
    except SubproblemDidNotConverge as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    _write_csv(
        outdir / "trace.csv",
        ["stage", "k", "phi", "F", "omega", "dist_to_stage_opt", "log10_dist"],
        rows,
    )
    meta = {
        "converged": True,
        "stages_run": result.stages_run,
        "total_lamm_iterations": result.total_lamm_iterations,
        "lambda": penalty.lam,
    }
    with open(outdir / "run_meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def _threads_from(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("ILAMM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"ILAMM_THREADS must be an integer, got {env!r}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ilamm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="fit one dataset from CSV files")
    trace = sub.add_parser("trace", help="fit and export per-iteration convergence data")
    for sp in (solve, trace):
        sp.add_argument("--config", required=True)
        sp.add_argument("--x", required=True, help="CSV design matrix, one row per sample")
        sp.add_argument("--y", required=True, help="CSV responses, one per line")
        sp.add_argument("--out", required=True)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)

    bench = sub.add_parser("bench", help="run a Monte Carlo benchmark scenario")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--threads", type=int, default=None)
    bench.add_argument("--seed", type=int, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        outdir = Path(args.out)
        if args.command == "solve":
            return cmd_solve(args.config, args.x, args.y, outdir)
        if args.command == "trace":
            return cmd_trace(args.config, args.x, args.y, outdir)
        threads = _threads_from(args)
        return cmd_bench(args.config, outdir, threads=threads, seed=args.seed)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SubproblemDidNotConverge as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
