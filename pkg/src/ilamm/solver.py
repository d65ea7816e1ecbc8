"""Approximate subproblem solving (stop at suboptimality <= eps) and the full
tightening-after-contraction driver over adaptive-weight stages."""

from __future__ import annotations

import numpy as np

from .core import (
    Coefficients,
    IterationRecord,
    PenaltyFamily,
    PenaltySpec,
    ProblemInstance,
    SolveResult,
    SolverConfig,
    StageTrace,
    beta_of,
)
from .lamm import PhiState, _lamm_step, weighted_l1
from .losses import loss_eval
from .penalties import CLASS_T, WeightVector, adaptive_weights, lamvec_of, uniform_weights


class SubproblemDidNotConverge(RuntimeError):
    """The LAMM iteration cap was hit before reaching the requested tolerance.

    Carries the best iterate seen so far and its suboptimality, so callers can
    decide whether a too-tight tolerance or a pathological instance is at fault.
    """

    def __init__(self, message, best_beta, best_omega, trace, phi_state):
        super().__init__(message)
        self.best_beta = best_beta
        self.best_omega = best_omega
        self.trace = trace
        self.phi_state = phi_state


def suboptimality(instance: ProblemInstance, beta, lamvec, gradient=None) -> float:
    """Minimal sup-norm of grad L(beta) + lam ⊙ xi over l1 subgradients xi.

    The minimization decouples per coordinate: active coordinates pin xi_j to
    sign(beta_j), inactive ones take the closest point of [-1, 1]. Frozen
    coordinates (lam_j = +inf) must sit at zero and contribute nothing.
    """
    b = beta_of(beta)
    lv = lamvec_of(lamvec)
    frozen = np.isinf(lv)
    if np.any(frozen & (b != 0)):
        raise ValueError("a frozen coordinate carries a nonzero value")
    if gradient is None:
        gradient = loss_eval(instance, b).gradient
    lv_f = np.where(frozen, 0.0, lv)
    active = b != 0
    r = np.where(
        active,
        np.abs(gradient + lv_f * np.sign(b)),
        np.maximum(np.abs(gradient) - lv_f, 0.0),
    )
    r[frozen] = 0.0
    return float(r.max()) if r.size else 0.0


def solve_subproblem(
    instance: ProblemInstance,
    lamvec,
    beta_init,
    eps: float,
    phi_state: PhiState,
    k_max: int,
    config: SolverConfig | None = None,
    stage: int = 1,
    keep_iterates: bool = False,
):
    """Run LAMM updates from beta_init until the suboptimality drops to eps.

    Returns (estimate, StageTrace, PhiState). The trace's k=0 record describes
    the starting point; iterates are retained only on request.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    lv = lamvec_of(lamvec)
    b = beta_of(beta_init).copy()
    if config is None:
        config = SolverConfig(lam=1.0)
    ev = loss_eval(instance, b)
    omega = suboptimality(instance, b, lv, gradient=ev.gradient)
    records = [IterationRecord(0, phi_state.phi, ev.value + weighted_l1(b, lv), omega, 0.0, 0)]
    iterates = [b.copy()] if keep_iterates else None
    state = phi_state
    best_beta, best_omega = b, omega
    k = 0
    while omega > eps:
        if k >= k_max:
            trace = StageTrace(stage, tuple(records), tuple(iterates) if iterates else None)
            raise SubproblemDidNotConverge(
                f"stage {stage}: suboptimality {best_omega:.3e} > eps {eps:.3e} "
                f"after {k_max} LAMM iterations",
                Coefficients(best_beta),
                best_omega,
                trace,
                state,
            )
        k += 1
        b_new, ev_new, state, inflations = _lamm_step(instance, lv, b, state, config, eval_prev=ev)
        omega = suboptimality(instance, b_new, lv, gradient=ev_new.gradient)
        step_norm = float(np.linalg.norm(b_new - b))
        records.append(
            IterationRecord(k, state.phi, ev_new.value + weighted_l1(b_new, lv), omega, step_norm, inflations)
        )
        b, ev = b_new, ev_new
        if iterates is not None:
            iterates.append(b.copy())
        if omega < best_omega:
            best_beta, best_omega = b, omega
    trace = StageTrace(stage, tuple(records), tuple(iterates) if iterates else None)
    return Coefficients(b), trace, state


def solve_tac(
    instance: ProblemInstance,
    penalty: PenaltySpec,
    config: SolverConfig,
    keep_iterates: bool = False,
) -> SolveResult:
    """Contraction stage under uniform l1 weights at tolerance eps_c, then
    tightening stages under adaptive folded-concave weights at eps_t.

    Stages warm-start at the previous estimate and carry the quadratic parameter
    across; the run stops once the weight vector stabilizes exactly (further
    stages would solve the identical subproblem) or at the stage cap. The plain
    lasso runs exactly one stage since its weights never change.
    """
    if penalty.family not in CLASS_T:
        raise ValueError("tightening requires a class-T family (or plain lasso)")
    cfg = config.resolved(instance.n, instance.d)
    weights = uniform_weights(cfg.lam, instance.d)
    phi_state = PhiState(cfg.phi0)

    est, trace, phi_state = solve_subproblem(
        instance, weights, cfg.initial_beta, cfg.eps_c, phi_state, cfg.k_max,
        config=cfg, stage=1, keep_iterates=keep_iterates,
    )
    estimates = [est]
    traces = [trace]

    if penalty.family is not PenaltyFamily.LASSO:
        for stage in range(2, cfg.t_max + 1):
            next_weights = adaptive_weights(penalty, estimates[-1])
            if np.array_equal(next_weights.lamvec, weights.lamvec):
                break
            weights = next_weights
            est, trace, phi_state = solve_subproblem(
                instance, weights, estimates[-1], cfg.eps_t, phi_state, cfg.k_max,
                config=cfg, stage=stage, keep_iterates=keep_iterates,
            )
            estimates.append(est)
            traces.append(trace)

    total = sum(t.iterations for t in traces)
    return SolveResult(
        per_stage_estimates=tuple(estimates),
        traces=tuple(traces),
        final_weights=weights.lamvec,
        total_lamm_iterations=total,
    )
