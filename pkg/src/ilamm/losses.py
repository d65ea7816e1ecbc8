"""Value/gradient evaluation for the convex loss family (squared, logistic, Huber)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import Coefficients, LossKind, ProblemInstance, beta_of


@dataclass(frozen=True)
class LossEval:
    value: float
    gradient: np.ndarray


def _check_beta(instance: ProblemInstance, beta) -> np.ndarray:
    b = beta_of(beta)
    if b.shape != (instance.d,):
        raise ValueError(f"beta has length {b.shape}, expected ({instance.d},)")
    return b


def squared_eval(instance: ProblemInstance, beta) -> LossEval:
    """Quadratic loss (2n)^{-1} ||y - X beta||_2^2 and its gradient X'(X beta - y)/n."""
    if instance.loss_kind is not LossKind.SQUARED:
        raise ValueError("instance does not carry the squared loss")
    b = _check_beta(instance, beta)
    n = instance.n
    r = instance.X @ b - instance.y
    value = float(r @ r) / (2.0 * n)
    gradient = instance.X.T @ r / n
    return LossEval(value, gradient)


def logistic_eval(instance: ProblemInstance, beta) -> LossEval:
    """Average logistic loss over +/-1 labels, overflow-safe for large margins.

    log(1 + exp(-m)) is evaluated through logaddexp, which switches to the
    asymptotic form for large |m| instead of exponentiating directly.
    """
    if instance.loss_kind is not LossKind.LOGISTIC:
        raise ValueError("instance does not carry the logistic loss")
    b = _check_beta(instance, beta)
    n = instance.n
    margins = instance.y * (instance.X @ b)
    value = float(np.logaddexp(0.0, -margins).sum()) / n
    # d/db log(1+exp(-m)) = -y x sigma(-m)
    slack = expit(-margins)
    gradient = -(instance.X.T @ (instance.y * slack)) / n
    return LossEval(value, gradient)


def _huber_rho(r: np.ndarray, alpha: float) -> np.ndarray:
    cut = 1.0 / alpha
    a = np.abs(r)
    return np.where(a <= cut, r * r, 2.0 * a / alpha - 1.0 / alpha**2)


def _huber_psi(r: np.ndarray, alpha: float) -> np.ndarray:
    # derivative of the per-residual loss; the knot |r| = 1/alpha takes the
    # quadratic-branch value (both one-sided derivatives agree there)
    cut = 1.0 / alpha
    return np.where(np.abs(r) <= cut, 2.0 * r, 2.0 / alpha * np.sign(r))


def huber_eval(instance: ProblemInstance, beta) -> LossEval:
    """Huber loss with cutoff parameter alpha: quadratic on |r| <= 1/alpha, linear beyond."""
    if instance.loss_kind is not LossKind.HUBER:
        raise ValueError("instance does not carry the Huber loss")
    alpha = instance.huber_alpha
    if alpha is None or alpha <= 0:
        raise ValueError("Huber loss requires a positive cutoff parameter")
    b = _check_beta(instance, beta)
    n = instance.n
    r = instance.y - instance.X @ b
    value = float(_huber_rho(r, alpha).sum()) / n
    gradient = -(instance.X.T @ _huber_psi(r, alpha)) / n
    return LossEval(value, gradient)


_EVALS = {
    LossKind.SQUARED: squared_eval,
    LossKind.LOGISTIC: logistic_eval,
    LossKind.HUBER: huber_eval,
}


def loss_eval(instance: ProblemInstance, beta) -> LossEval:
    """Dispatch on the instance's loss kind."""
    return _EVALS[instance.loss_kind](instance, beta)


def loss_value(instance: ProblemInstance, beta) -> float:
    """Loss value alone; avoids the gradient matvec where only descent is checked."""
    b = _check_beta(instance, beta)
    n = instance.n
    if instance.loss_kind is LossKind.SQUARED:
        r = instance.X @ b - instance.y
        return float(r @ r) / (2.0 * n)
    if instance.loss_kind is LossKind.LOGISTIC:
        margins = instance.y * (instance.X @ b)
        return float(np.logaddexp(0.0, -margins).sum()) / n
    r = instance.y - instance.X @ b
    return float(_huber_rho(r, instance.huber_alpha).sum()) / n


def hessian(instance: ProblemInstance, beta) -> np.ndarray:
    """Analytic Hessian of the loss at beta (Huber only off its knots).

    squared: X'X/n. logistic: X'WX/n with w_i = sigma(m_i) sigma(-m_i).
    Huber: (2/n) sum of x_i x_i' over samples in the quadratic branch.
    """
    b = _check_beta(instance, beta)
    X, n = instance.X, instance.n
    if instance.loss_kind is LossKind.SQUARED:
        return X.T @ X / n
    if instance.loss_kind is LossKind.LOGISTIC:
        m = instance.y * (X @ b)
        w = expit(m) * expit(-m)
        return (X * w[:, None]).T @ X / n
    alpha = instance.huber_alpha
    r = instance.y - X @ b
    inside = np.abs(r) <= 1.0 / alpha
    if np.any(np.abs(np.abs(r) - 1.0 / alpha) < 1e-12):
        raise ValueError("Huber Hessian requested at a knot residual")
    Xq = X[inside]
    return 2.0 * Xq.T @ Xq / n
