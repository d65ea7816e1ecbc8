"""Monte Carlo benchmark harness: data generation for the linear / logistic /
robust scenarios, cross-validated tuning, the oracle comparator, recovery
metrics, and a brute-force sparse-eigenvalue diagnostic."""

from __future__ import annotations

import enum
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .core import (
    Coefficients,
    LossKind,
    PenaltyFamily,
    PenaltySpec,
    ProblemInstance,
    SolverConfig,
    beta_of,
    denormalize_coefficients,
    normalize_columns,
)
from .lamm import PhiState
from .losses import hessian, loss_eval
from .penalties import adaptive_weights
from .solver import solve_subproblem, solve_tac


class ScenarioModel(enum.Enum):
    LINEAR = "linear"
    LOGISTIC = "logistic"
    HUBER_T3 = "huber_t3"


class DesignKind(enum.Enum):
    INDEPENDENT = "independent"
    CONSTANT = "constant"
    AR1 = "ar1"


@dataclass(frozen=True)
class Design:
    kind: DesignKind
    rho: float = 0.0

    def __post_init__(self):
        if self.kind is DesignKind.CONSTANT and not 0 <= self.rho < 1:
            raise ValueError("constant-correlation design needs rho in [0, 1)")
        if self.kind is DesignKind.AR1 and not -1 < self.rho < 1:
            raise ValueError("AR(1) design needs rho in (-1, 1)")


@dataclass(frozen=True)
class Scenario:
    """One simulation setting: model, size, truth, design and replication plan."""

    model: ScenarioModel
    n: int
    d: int
    beta_star: np.ndarray
    design: Design
    sigma: float = 1.0
    replicates: int = 100
    base_seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.d < 1:
            raise ValueError("need n >= 2 and d >= 1")
        b = np.array(self.beta_star, dtype=float)
        if b.shape != (self.d,):
            raise ValueError("beta_star must have length d")
        b.setflags(write=False)
        object.__setattr__(self, "beta_star", b)
        if self.replicates < 1:
            raise ValueError("need at least one replicate")


def example_truth(d: int, s_pattern=(5.0, 3.0, 0.0, 0.0, -2.0)) -> np.ndarray:
    """The benchmark truth vector: (5, 3, 0, 0, -2) padded with zeros."""
    if d < len(s_pattern):
        raise ValueError(f"d must be at least {len(s_pattern)}")
    beta = np.zeros(d)
    beta[: len(s_pattern)] = s_pattern
    return beta


def default_lambda(n: int, d: int, c: float = 1.0) -> float:
    """The tuning scale c * sqrt(log d / n)."""
    return c * math.sqrt(math.log(d) / n)


#: cross-validation grid for the constant c in lambda = c sqrt(log d / n)
DEFAULT_C_GRID = tuple(0.5 * k for k in range(1, 21))

_MASK64 = (1 << 64) - 1


def mix_seed(base_seed: int, replicate_index: int) -> int:
    """SplitMix64 finalizer applied to base_seed advanced by the replicate index.

    A fixed, documented 64-bit mixing function so that every replicate owns a
    reproducible generator stream without any coordination.
    """
    z = (int(base_seed) + (int(replicate_index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def covariance_factor(design: Design, d: int) -> np.ndarray:
    """Lower-triangular A with A A' equal to the design's correlation matrix."""
    if design.kind is DesignKind.INDEPENDENT:
        return np.eye(d)
    if design.kind is DesignKind.CONSTANT:
        rho = design.rho
        if not 0 <= rho < 1:
            raise ValueError("constant correlation must lie in [0, 1)")
        sigma = np.full((d, d), rho)
        np.fill_diagonal(sigma, 1.0)
    else:
        rho = design.rho
        if not -1 < rho < 1:
            raise ValueError("AR(1) correlation must lie in (-1, 1)")
        sigma = rho ** np.abs(np.subtract.outer(np.arange(d), np.arange(d)))
    return np.linalg.cholesky(sigma)


def generate(scenario: Scenario, replicate_index: int):
    """Draw one replicate: (normalized ProblemInstance, truth, true support).

    Rows are colored standard normals; responses follow the scenario model
    (Gaussian noise, logistic labels in {-1, +1}, or scaled Student-t(3) noise
    for the robust setting). Columns are normalized to norm sqrt(n); the truth
    is reported in the original column scale.
    """
    rng = np.random.default_rng(mix_seed(scenario.base_seed, replicate_index))
    n, d = scenario.n, scenario.d
    A = covariance_factor(scenario.design, d)
    Z = rng.standard_normal((n, d))
    X = Z if scenario.design.kind is DesignKind.INDEPENDENT else Z @ A.T
    signal = X @ scenario.beta_star
    if scenario.model is ScenarioModel.LINEAR:
        y = signal + scenario.sigma * rng.standard_normal(n)
        kind, alpha = LossKind.SQUARED, None
    elif scenario.model is ScenarioModel.LOGISTIC:
        y = np.where(rng.random(n) < expit(signal), 1.0, -1.0)
        kind, alpha = LossKind.LOGISTIC, None
    else:
        # t(3) standardized to unit variance, so sigma is the noise standard
        # deviation in both the Gaussian and the heavy-tailed scenarios
        y = signal + scenario.sigma * rng.standard_t(3, size=n) / math.sqrt(3.0)
        kind, alpha = LossKind.HUBER, default_lambda(n, d)
    instance = ProblemInstance(X=X, y=y, loss_kind=kind, huber_alpha=alpha)
    instance = normalize_columns(instance)
    truth = Coefficients(scenario.beta_star)
    return instance, truth, truth.support


def _held_out_error(instance: ProblemInstance, idx: np.ndarray, beta) -> float:
    """Mean per-sample validation loss on the given rows, matching the loss kind."""
    X, y = instance.X[idx], instance.y[idx]
    b = beta_of(beta)
    if instance.loss_kind is LossKind.SQUARED:
        r = y - X @ b
        return float(r @ r) / len(idx)
    if instance.loss_kind is LossKind.LOGISTIC:
        return float(np.logaddexp(0.0, -y * (X @ b)).sum()) / len(idx)
    from .losses import _huber_rho

    return float(_huber_rho(y - X @ b, instance.huber_alpha).sum()) / len(idx)


def _subset_instance(instance: ProblemInstance, idx: np.ndarray) -> ProblemInstance:
    return ProblemInstance(
        X=instance.X[idx],
        y=instance.y[idx],
        loss_kind=instance.loss_kind,
        huber_alpha=instance.huber_alpha,
    )


def _fold_indices(n: int, folds: int, seed: int):
    """Deterministic shuffled k-fold split; every fold keeps at least 2 samples."""
    if folds < 2:
        raise ValueError("need at least two folds")
    perm = np.random.default_rng(seed).permutation(n)
    parts = np.array_split(perm, folds)
    if min(len(p) for p in parts) < 2:
        raise ValueError(f"a fold with fewer than 2 samples (n = {n}, folds = {folds})")
    out = []
    for i in range(folds):
        val = np.sort(parts[i])
        train = np.sort(np.concatenate([parts[j] for j in range(folds) if j != i]))
        out.append((train, val))
    return out


def cross_validate_lambda(
    instance: ProblemInstance,
    penalty_family: PenaltyFamily,
    folds: int,
    c_grid,
    seed: int,
    config: SolverConfig | None = None,
):
    """Grid-search lambda = c sqrt(log d / n) by k-fold held-out prediction error.

    Only the contraction-stage lambda is tuned; tightening weights update
    automatically inside each fit. Ties break toward the larger lambda
    (the sparser model). Returns (lambda_star, [(lambda, mean error), ...]).
    """
    c_grid = list(c_grid)
    if not c_grid:
        raise ValueError("empty candidate grid")
    n, d = instance.n, instance.d
    splits = _fold_indices(n, folds, seed)
    fold_insts = [(_subset_instance(instance, tr), val) for tr, val in splits]
    curve = []
    best_lam, best_err = None, math.inf
    for c in sorted(c_grid, reverse=True):
        lam = default_lambda(n, d, c)
        penalty = PenaltySpec(penalty_family, lam)
        cfg = _with_lambda(config, lam)
        total, weight = 0.0, 0
        for (train_inst, val), (train_idx, _) in zip(fold_insts, splits):
            fit = solve_tac(train_inst, penalty, cfg)
            total += _held_out_error(instance, val, fit.final) * len(val)
            weight += len(val)
        err = total / weight
        curve.append((lam, err))
        if err < best_err:
            best_lam, best_err = lam, err
    curve.sort(key=lambda t: t[0])
    return best_lam, curve


def _with_lambda(config: SolverConfig | None, lam: float) -> SolverConfig:
    if config is None:
        return SolverConfig(lam=lam)
    return replace(config, lam=lam)


def oracle_estimator(instance: ProblemInstance, support) -> Coefficients:
    """Loss minimizer restricted to the given support, zeros elsewhere.

    Squared loss solves the normal equations on the active columns; the smooth
    non-quadratic losses run a damped Newton iteration down to gradient norm
    1e-10 on the restricted problem.
    """
    S = sorted(int(j) for j in support)
    n, d = instance.n, instance.d
    if len(S) >= n:
        raise ValueError(f"support size {len(S)} must stay below n = {n}")
    beta = np.zeros(d)
    if not S:
        return Coefficients(beta)
    Xs = instance.X[:, S]
    if instance.loss_kind is LossKind.SQUARED:
        if np.linalg.matrix_rank(Xs) < len(S):
            raise np.linalg.LinAlgError("restricted design is rank deficient")
        coef, *_ = np.linalg.lstsq(Xs, instance.y, rcond=None)
        beta[S] = coef
        return Coefficients(beta)
    sub = ProblemInstance(
        X=Xs, y=instance.y, loss_kind=instance.loss_kind, huber_alpha=instance.huber_alpha
    )
    beta[S] = _damped_newton(sub)
    return Coefficients(beta)


def _damped_newton(instance: ProblemInstance, tol: float = 1e-10, max_iter: int = 500) -> np.ndarray:
    b = np.zeros(instance.d)
    ev = loss_eval(instance, b)
    for _ in range(max_iter):
        g = ev.gradient
        if np.linalg.norm(g) <= tol:
            return b
        try:
            H = hessian(instance, b)
        except ValueError:
            H = np.eye(instance.d)  # Huber knot: fall back to a gradient step
        ridge = 0.0
        while True:
            try:
                step = np.linalg.solve(H + ridge * np.eye(instance.d), g)
                break
            except np.linalg.LinAlgError:
                ridge = max(2 * ridge, 1e-10)
        t = 1.0
        for _ in range(60):
            cand = b - t * step
            ev_cand = loss_eval(instance, cand)
            if ev_cand.value <= ev.value or np.linalg.norm(ev_cand.gradient) < np.linalg.norm(g):
                b, ev = cand, ev_cand
                break
            t /= 2
        else:
            raise RuntimeError("restricted Newton stalled (separable or degenerate data)")
    if np.linalg.norm(ev.gradient) > tol:
        raise RuntimeError("restricted Newton did not reach the gradient tolerance")
    return b


def metrics(estimate, truth):
    """(MSE, TP, FP): squared l2 estimation error and support hit/false counts."""
    est = beta_of(estimate)
    tru = beta_of(truth)
    if est.shape != tru.shape:
        raise ValueError("estimate and truth must share a dimension")
    diff = est - tru
    mse = float(diff @ diff)
    est_s = set(np.flatnonzero(est).tolist())
    tru_s = set(np.flatnonzero(tru).tolist())
    return mse, len(est_s & tru_s), len(est_s - tru_s)


def sparse_eig_bounds(instance: ProblemInstance, beta, m: int):
    """Extreme eigenvalues of all principal Hessian submatrices of size <= m.

    Brute-force diagnostic: enumerates every support, so it is restricted to
    d <= 20. Returns (rho_minus, rho_plus).
    """
    d = instance.d
    if d > 20:
        raise ValueError("exhaustive enumeration is limited to d <= 20")
    if not 1 <= m <= d:
        raise ValueError("need 1 <= m <= d")
    H = hessian(instance, beta)
    lo, hi = math.inf, -math.inf
    for size in range(1, m + 1):
        for J in itertools.combinations(range(d), size):
            vals = np.linalg.eigvalsh(H[np.ix_(J, J)])
            lo = min(lo, vals[0])
            hi = max(hi, vals[-1])
    return lo, hi


# ---------------------------------------------------------------------------
# benchmark driver

KNOWN_METHODS = ("ILAMM_SCAD", "ILAMM_MCP", "LASSO", "REFIT", "ALASSO", "ORACLE")

_METHOD_FAMILY = {
    "ILAMM_SCAD": PenaltyFamily.SCAD,
    "ILAMM_MCP": PenaltyFamily.MCP,
    "LASSO": PenaltyFamily.LASSO,
}


@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    method: str
    mse: float
    tp: int
    fp: int
    time_s: float
    lam: float
    status: str  # "ok" or the failure reason


@dataclass(frozen=True)
class MethodSummary:
    method: str
    median_mse: float
    median_tp: float
    median_fp: float
    median_time_s: float
    failures: int
    completed: int


@dataclass(frozen=True)
class BenchSummary:
    methods: tuple[MethodSummary, ...]
    replicates: tuple[ReplicateRecord, ...]

    def row(self, method: str) -> MethodSummary:
        for m in self.methods:
            if m.method == method:
                return m
        raise KeyError(method)


def _bench_config(config: SolverConfig | None, n: int) -> SolverConfig:
    """Benchmark-harness solver settings: tightening tolerance 0.2/sqrt(n).

    Still of order sqrt(1/n), but small enough that the optimization error does
    not contaminate the estimation-error medians under badly conditioned
    designs (at eps_t = sqrt(1/n) exactly, the leftover optimization error
    dominates the constant-correlation rows).
    """
    base = config if config is not None else SolverConfig(lam=1.0)
    if base.eps_t is not None:
        return base
    return replace(base, eps_t=0.2 / math.sqrt(n))


def _lasso_config(config: SolverConfig | None, n: int) -> SolverConfig:
    """Solver settings for the plain-lasso comparator.

    The lasso is a final estimator here, not a contraction initializer, and its
    CV curve is only faithful when fold fits are solved well below the
    statistical scale; 0.2/sqrt(n) keeps the tolerance at the tightening order
    while removing the selection bias a crude stop introduces.
    """
    tight = 0.2 / math.sqrt(n)
    base = config if config is not None else SolverConfig(lam=1.0)
    eps_c = base.eps_c if base.eps_c is not None else tight
    eps_t = base.eps_t if base.eps_t is not None else min(tight, eps_c)
    return replace(base, eps_c=eps_c, eps_t=eps_t)


def _fit_lasso(instance, folds, c_grid, cv_seed, config):
    cfg = _lasso_config(config, instance.n)
    lam, _ = cross_validate_lambda(instance, PenaltyFamily.LASSO, folds, c_grid, cv_seed, cfg)
    result = solve_tac(instance, PenaltySpec(PenaltyFamily.LASSO, lam), _with_lambda(cfg, lam))
    return lam, result.final


def _alasso_estimate(instance, beta_lasso, folds, c_grid, cv_seed, config):
    """Sequential tuning: reciprocal weights from the lasso fit, own lambda by CV.

    Coordinates at exact zero in the seed carry infinite weight, so they can
    never re-enter (zero is an absorbing state).
    """
    n, d = instance.n, instance.d
    splits = _fold_indices(n, folds, cv_seed)
    fold_insts = [(_subset_instance(instance, tr), val) for tr, val in splits]
    best_lam, best_err = None, math.inf
    for c in sorted(c_grid, reverse=True):
        lam = default_lambda(n, d, c)
        w = adaptive_weights(PenaltySpec(PenaltyFamily.ADAPTIVE_RECIP, lam), beta_lasso)
        total, weight = 0.0, 0
        for (train_inst, val), _ in zip(fold_insts, splits):
            cfg = _with_lambda(config, lam).resolved(train_inst.n, d)
            est, _, _ = solve_subproblem(
                train_inst, w, beta_lasso, cfg.eps_t, PhiState(cfg.phi0), cfg.k_max, config=cfg
            )
            total += _held_out_error(instance, val, est) * len(val)
            weight += len(val)
        err = total / weight
        if err < best_err:
            best_lam, best_err = lam, err
    w = adaptive_weights(PenaltySpec(PenaltyFamily.ADAPTIVE_RECIP, best_lam), beta_lasso)
    cfg = _with_lambda(config, best_lam).resolved(n, d)
    est, _, _ = solve_subproblem(
        instance, w, beta_lasso, cfg.eps_t, PhiState(cfg.phi0), cfg.k_max, config=cfg
    )
    return best_lam, est


def run_replicate(scenario: Scenario, methods, replicate: int, config=None,
                  folds: int = 3, c_grid=DEFAULT_C_GRID):
    """All requested methods on one generated dataset; returns ReplicateRecords."""
    instance, truth, S = generate(scenario, replicate)
    cv_seed = mix_seed(mix_seed(scenario.base_seed, replicate), 1)
    records = []
    lasso_cache = None

    def lasso_fit():
        nonlocal lasso_cache
        if lasso_cache is None:
            lasso_cache = _fit_lasso(instance, folds, c_grid, cv_seed, config)
        return lasso_cache

    bench_cfg = _bench_config(config, instance.n)
    for method in methods:
        t0 = time.perf_counter()
        lam_used = math.nan
        try:
            if method in _METHOD_FAMILY:
                family = _METHOD_FAMILY[method]
                if family is PenaltyFamily.LASSO:
                    lam_used, est = lasso_fit()
                else:
                    lam_used, _ = cross_validate_lambda(
                        instance, family, folds, c_grid, cv_seed, bench_cfg
                    )
                    est = solve_tac(
                        instance, PenaltySpec(family, lam_used), _with_lambda(bench_cfg, lam_used)
                    ).final
            elif method == "REFIT":
                lam_used, lasso_est = lasso_fit()
                est = oracle_estimator(instance, lasso_est.support)
            elif method == "ALASSO":
                _, lasso_est = lasso_fit()
                lam_used, est = _alasso_estimate(
                    instance, lasso_est.beta, folds, c_grid, cv_seed,
                    _lasso_config(config, instance.n),
                )
            elif method == "ORACLE":
                est = oracle_estimator(instance, S)
            else:
                raise ValueError(f"unknown method {method!r}")
            est_orig = denormalize_coefficients(est, instance.column_scales)
            mse, tp, fp = metrics(est_orig, truth)
            elapsed = time.perf_counter() - t0
            records.append(ReplicateRecord(replicate, method, mse, tp, fp, elapsed, lam_used, "ok"))
        except (RuntimeError, np.linalg.LinAlgError, ValueError) as exc:
            if method not in KNOWN_METHODS:
                raise
            elapsed = time.perf_counter() - t0
            records.append(
                ReplicateRecord(replicate, method, math.nan, 0, 0, elapsed, lam_used,
                                f"failed: {exc}")
            )
    return records


def _replicate_worker(args):
    scenario, methods, replicate, config, folds, c_grid = args
    return run_replicate(scenario, methods, replicate, config, folds, c_grid)


def run_benchmark(
    scenario: Scenario,
    methods,
    config: SolverConfig | None = None,
    folds: int = 3,
    c_grid=DEFAULT_C_GRID,
    n_jobs: int = 1,
) -> BenchSummary:
    """Generate `scenario.replicates` datasets, run every method on each, and
    aggregate per-method medians of (MSE, TP, FP, wall time).

    Replicates are independent and may run in parallel; results are assembled
    in replicate order so the summary never depends on scheduling. Failed
    method runs are excluded from the medians and surfaced as a count.
    """
    methods = list(methods)
    unknown = [m for m in methods if m not in KNOWN_METHODS]
    if unknown:
        raise ValueError(f"unknown method(s): {', '.join(map(repr, unknown))}")
    reps = range(scenario.replicates)
    if n_jobs > 1:
        jobs = [(scenario, methods, r, config, folds, c_grid) for r in reps]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            per_rep = list(pool.map(_replicate_worker, jobs))
    else:
        per_rep = [run_replicate(scenario, methods, r, config, folds, c_grid) for r in reps]
    records = tuple(rec for chunk in per_rep for rec in chunk)

    summaries = []
    for method in methods:
        ok = [r for r in records if r.method == method and r.status == "ok"]
        bad = [r for r in records if r.method == method and r.status != "ok"]
        if ok:
            summaries.append(
                MethodSummary(
                    method=method,
                    median_mse=float(np.median([r.mse for r in ok])),
                    median_tp=float(np.median([r.tp for r in ok])),
                    median_fp=float(np.median([r.fp for r in ok])),
                    median_time_s=float(np.median([r.time_s for r in ok])),
                    failures=len(bad),
                    completed=len(ok),
                )
            )
        else:
            summaries.append(
                MethodSummary(method, math.nan, math.nan, math.nan, math.nan, len(bad), 0)
            )
    return BenchSummary(tuple(summaries), records)
