"""One local adaptive majorize-minimization update: isotropic quadratic
majorization solved by soft-thresholding, with multiplicative inflation of the
quadratic parameter until the local majorization property holds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Coefficients, ProblemInstance, SolverConfig, beta_of
from .losses import LossEval, loss_eval, loss_value
from .penalties import WeightVector, lamvec_of

#: inflations beyond this signal a non-finite or non-smooth loss evaluation
INFLATION_CAP = 200

#: relative slack absorbing floating-point round-off in the majorization test
MAJORIZATION_SLACK = 1e-12

#: measured gaps below this scale are indistinguishable from round-off; they
#: accept the step but freeze the next iterate's discount of phi
NOISE_GUARD = 1e-13


class LammInflationError(RuntimeError):
    """The quadratic parameter grew past the hard cap without majorizing."""


@dataclass
class PhiState:
    """Current isotropic quadratic parameter, carried across iterations and stages.

    ``allow_discount`` records whether the last accepted majorization gap stood
    clear of floating-point noise; when it did not, the next iterate skips the
    gamma_u^-1 discount so that round-off can never walk phi downward.
    """

    phi: float
    allow_discount: bool = True

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError("phi must be positive")


def soft_threshold(x, t) -> np.ndarray:
    """Componentwise sign(x) * max(|x| - t, 0); a +inf threshold yields exactly 0."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("thresholds must be non-negative")
    with np.errstate(invalid="ignore"):
        mag = np.abs(x) - t
    return np.sign(x) * np.maximum(np.where(np.isinf(t), -np.inf, mag), 0.0)


def weighted_l1(beta, lamvec) -> float:
    """sum_j lam_j |beta_j| over the unfrozen coordinates (frozen ones contribute 0)."""
    b = beta_of(beta)
    lv = lamvec_of(lamvec)
    finite = np.where(np.isinf(lv), 0.0, lv)
    return float(finite @ np.abs(b))


def objective_F(instance: ProblemInstance, beta, lamvec) -> float:
    """F(beta) = L(beta) + sum_j lam_j |beta_j|.

    A frozen coordinate (lam_j = +inf) must sit at exactly zero.
    """
    b = beta_of(beta)
    lv = lamvec_of(lamvec)
    bad = np.isinf(lv) & (b != 0)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise ValueError(f"coordinate {j} is frozen at zero but beta[{j}] = {b[j]}")
    return loss_value(instance, b) + weighted_l1(b, lv)


def prox_step(instance: ProblemInstance, beta_old, lamvec, phi: float, gradient=None) -> np.ndarray:
    """Exact minimizer of the isotropic quadratic majorization at beta_old:
    soft-threshold the gradient step beta_old - grad/phi at lamvec/phi.

    Frozen coordinates are pinned to zero directly rather than thresholded by
    +inf at the arithmetic level. A precomputed gradient at beta_old may be
    passed to avoid a repeated loss evaluation.
    """
    if not phi > 0:
        raise ValueError("phi must be positive")
    b = beta_of(beta_old)
    lv = lamvec_of(lamvec)
    if gradient is None:
        gradient = loss_eval(instance, b).gradient
    frozen = np.isinf(lv)
    step = b - gradient / phi
    thresh = np.where(frozen, 0.0, lv) / phi
    out = soft_threshold(step, thresh)
    if frozen.any():
        out[frozen] = 0.0
    return out


def majorization_gap(instance, beta_new, beta_old, lamvec, phi, eval_old: LossEval | None = None,
                     value_new: float | None = None, slack: float = MAJORIZATION_SLACK):
    """Gap Psi(beta_new; beta_old) - F(beta_new) of the local majorization test.

    Returns (holds, gap) where the test allows a relative round-off slack.
    """
    b_new = beta_of(beta_new)
    b_old = beta_of(beta_old)
    lv = lamvec_of(lamvec)
    if eval_old is None:
        eval_old = loss_eval(instance, b_old)
    if value_new is None:
        value_new = loss_value(instance, b_new)
    delta = b_new - b_old
    pen = weighted_l1(b_new, lv)
    psi = eval_old.value + float(eval_old.gradient @ delta) + 0.5 * phi * float(delta @ delta) + pen
    f_new = value_new + pen
    gap = psi - f_new
    holds = f_new <= psi + slack * (1.0 + abs(psi))
    return holds, gap


def majorization_holds(instance, beta_new, beta_old, lamvec, phi):
    """Whether F(beta_new) <= Psi(beta_new; beta_old), and the gap Psi - F."""
    return majorization_gap(instance, beta_new, beta_old, lamvec, phi)


def _lamm_step(instance, lamvec, beta_prev, phi_state: PhiState, config: SolverConfig,
               eval_prev: LossEval | None = None):
    """One accepted LAMM update; returns (beta_new, eval_new, PhiState, inflations).

    eval_new is the loss evaluation at beta_new, reusable by the caller for the
    suboptimality check and the next prox step.
    """
    lv = lamvec_of(lamvec)
    b_prev = beta_of(beta_prev)
    if eval_prev is None:
        eval_prev = loss_eval(instance, b_prev)
    phi_prev = phi_state.phi
    if phi_state.allow_discount:
        phi = max(config.phi0, phi_prev / config.gamma_u)
    else:
        phi = max(config.phi0, phi_prev)
    inflations = 0
    while True:
        # the round-off slack must never justify a *decrease* of phi: a trial
        # value below the last accepted one has to majorize outright, else the
        # slack feeds an accept/expand limit cycle near stationary points
        slack = 0.0 if phi < phi_prev * (1.0 - 1e-12) else MAJORIZATION_SLACK
        b_new = prox_step(instance, b_prev, lv, phi, gradient=eval_prev.gradient)
        eval_new = loss_eval(instance, b_new)
        holds, gap = majorization_gap(
            instance, b_new, b_prev, lv, phi,
            eval_old=eval_prev, value_new=eval_new.value, slack=slack,
        )
        if holds and np.isfinite(eval_new.value):
            psi_scale = 1.0 + abs(eval_new.value)
            allow = gap > NOISE_GUARD * psi_scale
            return b_new, eval_new, PhiState(phi, allow), inflations
        inflations += 1
        if inflations > INFLATION_CAP:
            raise LammInflationError(
                f"quadratic parameter inflated {inflations} times without majorizing "
                f"(phi = {phi:.3e}); the loss evaluation is likely non-finite or non-smooth"
            )
        phi *= config.gamma_u


def lamm_iterate(instance, lamvec, beta_prev, phi_state: PhiState, config: SolverConfig):
    """One LAMM update: prox at phi, inflate phi by gamma_u until majorization holds.

    Returns (beta_new, new PhiState, inflation count). The accepted update never
    increases the penalized objective.
    """
    b_new, _, new_state, inflations = _lamm_step(instance, lamvec, beta_prev, phi_state, config)
    return b_new, new_state, inflations
