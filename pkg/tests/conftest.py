import numpy as np
import pytest

from ilamm import Coefficients, LossKind, ProblemInstance, default_lambda


def make_instance(rng, n=8, d=5, loss_kind=LossKind.SQUARED, alpha=None, sigma=0.5):
    """Small random instance with a 2-sparse truth, for property-style checks."""
    X = rng.standard_normal((n, d))
    beta = np.zeros(d)
    beta[: min(2, d)] = rng.uniform(0.5, 2.0, size=min(2, d)) * rng.choice([-1.0, 1.0], min(2, d))
    eta = X @ beta
    if loss_kind is LossKind.LOGISTIC:
        from scipy.special import expit

        y = np.where(rng.random(n) < expit(eta), 1.0, -1.0)
        return ProblemInstance(X=X, y=y, loss_kind=loss_kind), beta
    y = eta + sigma * rng.standard_normal(n)
    if loss_kind is LossKind.HUBER:
        alpha = alpha if alpha is not None else 0.7
        return ProblemInstance(X=X, y=y, loss_kind=loss_kind, huber_alpha=alpha), beta
    return ProblemInstance(X=X, y=y, loss_kind=loss_kind), beta


def finite_difference_gradient(f, beta, h=1e-6):
    """Central-difference gradient oracle."""
    beta = np.asarray(beta, dtype=float)
    g = np.zeros_like(beta)
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = h
        g[j] = (f(beta + e) - f(beta - e)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
