import math

import mpmath
import numpy as np
import pytest

from ilamm import LossKind, ProblemInstance, huber_eval, logistic_eval, loss_eval, squared_eval
from ilamm.losses import loss_value

from conftest import finite_difference_gradient, make_instance


def test_squared_identity_design():
    inst = ProblemInstance(X=np.eye(2), y=np.array([1.0, 2.0]), loss_kind=LossKind.SQUARED)
    ev = squared_eval(inst, np.zeros(2))
    assert ev.value == pytest.approx(1.25)
    assert np.allclose(ev.gradient, [-0.5, -1.0])


def test_squared_exact_fit():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((6, 3))
    beta = rng.standard_normal(3)
    inst = ProblemInstance(X=X, y=X @ beta, loss_kind=LossKind.SQUARED)
    ev = squared_eval(inst, beta)
    assert ev.value == pytest.approx(0.0, abs=1e-28)
    assert np.allclose(ev.gradient, 0.0, atol=1e-14)


def test_squared_gradient_matches_finite_differences(rng):
    inst, _ = make_instance(rng, n=6, d=4)
    beta = rng.standard_normal(4)
    ev = squared_eval(inst, beta)
    fd = finite_difference_gradient(lambda b: loss_value(inst, b), beta)
    assert np.allclose(ev.gradient, fd, rtol=1e-5, atol=1e-8)


def test_logistic_at_zero_is_log_two(rng):
    inst, _ = make_instance(rng, n=9, d=3, loss_kind=LossKind.LOGISTIC)
    ev = logistic_eval(inst, np.zeros(3))
    assert ev.value == pytest.approx(math.log(2.0), rel=1e-12)


def test_logistic_single_sample_gradient():
    inst = ProblemInstance(X=np.array([[1.0]]), y=np.array([1.0]), loss_kind=LossKind.LOGISTIC)
    ev = logistic_eval(inst, np.zeros(1))
    assert ev.gradient[0] == pytest.approx(-0.5)


@pytest.mark.parametrize("margin", [800.0, -800.0, 45.0, -45.0])
def test_logistic_extreme_margins_match_extended_precision(margin):
    # single sample with x = margin, y = +1, beta = 1 gives the target margin
    inst = ProblemInstance(X=np.array([[margin]]), y=np.array([1.0]), loss_kind=LossKind.LOGISTIC)
    ev = logistic_eval(inst, np.ones(1))
    with mpmath.workdps(400):
        expected = float(mpmath.log(1 + mpmath.exp(-margin)))
    assert math.isfinite(ev.value)
    assert ev.value == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_logistic_gradient_matches_finite_differences(rng):
    inst, _ = make_instance(rng, n=8, d=4, loss_kind=LossKind.LOGISTIC)
    beta = 0.3 * rng.standard_normal(4)
    ev = logistic_eval(inst, beta)
    fd = finite_difference_gradient(lambda b: loss_value(inst, b), beta)
    assert np.allclose(ev.gradient, fd, rtol=1e-5, atol=1e-9)


def test_huber_branches_agree_at_knot():
    from ilamm.losses import _huber_rho

    alpha = 0.8
    knot = 1.0 / alpha
    quad = knot**2
    lin = 2.0 * knot / alpha - 1.0 / alpha**2
    assert quad == pytest.approx(lin, rel=1e-15)
    assert _huber_rho(np.array([knot]), alpha)[0] == pytest.approx(1.0 / alpha**2)


def test_huber_quadratic_branch_values():
    inst = ProblemInstance(
        X=np.array([[1.0]]), y=np.array([0.5]), loss_kind=LossKind.HUBER, huber_alpha=1.0
    )
    ev = huber_eval(inst, np.zeros(1))  # residual 0.5, inside the quadratic branch
    assert ev.value == pytest.approx(0.25)
    # d loss / d residual = 2 r = 1.0; gradient in beta carries the extra -x factor
    assert ev.gradient[0] == pytest.approx(-1.0)


def test_huber_gradient_matches_finite_differences(rng):
    alpha = 0.7
    for _ in range(10):
        inst, _ = make_instance(rng, n=7, d=4, loss_kind=LossKind.HUBER, alpha=alpha)
        beta = rng.standard_normal(4)
        r = inst.y - inst.X @ beta
        if np.any(np.abs(np.abs(r) - 1.0 / alpha) < 1e-4):
            continue  # keep clear of the knots, where the fd stencil straddles branches
        ev = huber_eval(inst, beta)
        fd = finite_difference_gradient(lambda b: loss_value(inst, b), beta)
        assert np.allclose(ev.gradient, fd, rtol=1e-5, atol=1e-8)


def test_huber_tiny_alpha_reduces_to_pure_quadratic(rng):
    # with all residuals inside the quadratic branch, the per-sample loss is r^2,
    # i.e. exactly twice the (2n)^-1-normalized squared loss
    inst, _ = make_instance(rng, n=6, d=3)
    beta = rng.standard_normal(3)
    residuals = inst.y - inst.X @ beta
    alpha = 0.5 / np.max(np.abs(residuals))
    hub = ProblemInstance(X=inst.X, y=inst.y, loss_kind=LossKind.HUBER, huber_alpha=alpha)
    ev_h = huber_eval(hub, beta)
    ev_s = squared_eval(inst, beta)
    assert ev_h.value == pytest.approx(2.0 * ev_s.value, rel=1e-14)
    assert np.allclose(ev_h.gradient, 2.0 * ev_s.gradient, rtol=1e-14)


@pytest.mark.parametrize("loss_kind", [LossKind.SQUARED, LossKind.LOGISTIC, LossKind.HUBER])
def test_convexity_surrogate(loss_kind, rng):
    inst, _ = make_instance(rng, n=10, d=4, loss_kind=loss_kind)
    for _ in range(200):
        b1 = rng.standard_normal(4)
        b2 = rng.standard_normal(4)
        v1 = loss_value(inst, b1)
        v2 = loss_value(inst, b2)
        for t in (0.25, 0.5, 0.75):
            mid = loss_value(inst, t * b1 + (1 - t) * b2)
            assert mid <= t * v1 + (1 - t) * v2 + 1e-10


def test_dimension_mismatch_raises(rng):
    inst, _ = make_instance(rng, n=5, d=3)
    with pytest.raises(ValueError):
        squared_eval(inst, np.zeros(4))


def test_wrong_loss_kind_raises(rng):
    inst, _ = make_instance(rng, n=5, d=3)
    with pytest.raises(ValueError):
        logistic_eval(inst, np.zeros(3))
    with pytest.raises(ValueError):
        huber_eval(inst, np.zeros(3))


def test_loss_eval_dispatch(rng):
    inst, _ = make_instance(rng, n=5, d=3)
    assert loss_eval(inst, np.zeros(3)).value == squared_eval(inst, np.zeros(3)).value
