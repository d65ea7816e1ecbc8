import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ilamm import PenaltyFamily, PenaltySpec, adaptive_weights, penalty_value, weight

CLASS_T_FAMILIES = [
    PenaltyFamily.LASSO,
    PenaltyFamily.SCAD,
    PenaltyFamily.MCP,
    PenaltyFamily.CAPPED_L1,
]


def test_scad_weight_at_origin_and_ramp():
    spec = PenaltySpec(PenaltyFamily.SCAD, lam=0.8, a=3.7)
    assert weight(spec, 0.0) == 1.0
    assert weight(spec, 2 * spec.lam) == pytest.approx(1.7 / 2.7)


def test_scad_weight_cross_checked_by_numeric_derivative():
    spec = PenaltySpec(PenaltyFamily.SCAD, lam=0.8, a=3.7)
    t = 2 * spec.lam
    h = 1e-7
    num = (
        penalty_value(spec, np.array([t + h])) - penalty_value(spec, np.array([t - h]))
    ) / (2 * h)
    assert num / spec.lam == pytest.approx(weight(spec, t), abs=1e-7)


def test_mcp_weight_linear_decay():
    spec = PenaltySpec(PenaltyFamily.MCP, lam=0.6, a=3.0)
    assert weight(spec, 1.5 * spec.lam) == pytest.approx(0.5)
    assert weight(spec, 3 * spec.lam) == 0.0


def test_capped_l1_right_continuous_drop():
    spec = PenaltySpec(PenaltyFamily.CAPPED_L1, lam=0.5, a=3.0)
    assert weight(spec, spec.a * spec.lam - 1e-12) == 1.0
    assert weight(spec, spec.a * spec.lam) == 0.0


def test_weight_rejects_negative_and_reciprocal():
    spec = PenaltySpec(PenaltyFamily.SCAD, lam=1.0)
    with pytest.raises(ValueError):
        weight(spec, -0.1)
    with pytest.raises(ValueError):
        weight(PenaltySpec(PenaltyFamily.ADAPTIVE_RECIP, lam=1.0), 0.5)


def test_adaptive_weights_lasso_constant():
    spec = PenaltySpec(PenaltyFamily.LASSO, lam=0.3)
    for beta in (np.zeros(4), np.array([5.0, -2.0, 0.0, 1e-9])):
        w = adaptive_weights(spec, beta)
        assert np.array_equal(w.lamvec, np.full(4, 0.3))


def test_adaptive_weights_strong_signal_unpenalized():
    spec = PenaltySpec(PenaltyFamily.SCAD, lam=0.5, a=3.7)
    w = adaptive_weights(spec, np.array([4 * spec.lam, 0.0]))
    assert w.lamvec[0] == 0.0
    assert w.lamvec[1] == spec.lam


def test_adaptive_weights_reciprocal_with_zero_sentinel():
    spec = PenaltySpec(PenaltyFamily.ADAPTIVE_RECIP, lam=1.0)
    w = adaptive_weights(spec, np.array([0.0, 2.0]))
    assert np.isinf(w.lamvec[0])
    assert w.lamvec[1] == pytest.approx(0.5)
    assert list(w.frozen) == [True, False]


@pytest.mark.parametrize("family", CLASS_T_FAMILIES)
def test_penalty_value_zero_at_origin(family):
    spec = PenaltySpec(family, lam=0.7)
    assert penalty_value(spec, np.zeros(3)) == 0.0


def test_penalty_value_lasso_is_weighted_l1():
    spec = PenaltySpec(PenaltyFamily.LASSO, lam=0.5)
    assert penalty_value(spec, np.array([1.0, -2.0])) == pytest.approx(1.5)


def test_scad_saturation_matches_numeric_integral():
    spec = PenaltySpec(PenaltyFamily.SCAD, lam=0.9, a=3.7)
    t = 10 * spec.lam
    assert penalty_value(spec, np.array([t])) == pytest.approx(2.35 * spec.lam**2, rel=1e-12)
    # independent route: integrate lam * w numerically up to t
    grid = np.linspace(0.0, t, 200001)
    integral = np.trapezoid(spec.lam * weight(spec, grid), grid)
    assert penalty_value(spec, np.array([t])) == pytest.approx(integral, rel=1e-6)


def test_penalty_value_rejects_reciprocal():
    with pytest.raises(ValueError):
        penalty_value(PenaltySpec(PenaltyFamily.ADAPTIVE_RECIP, lam=1.0), np.ones(2))


@pytest.mark.parametrize("family", CLASS_T_FAMILIES)
def test_class_t_membership_on_grid(family):
    spec = PenaltySpec(family, lam=0.65)
    grid = np.linspace(0.0, 10 * spec.lam, 10000)
    w = weight(spec, grid)
    assert np.all(w >= 0.0) and np.all(w <= 1.0)
    assert np.all(np.diff(w) <= 1e-15)
    assert weight(spec, 0.0) == 1.0


@pytest.mark.parametrize("family", CLASS_T_FAMILIES)
def test_penalty_derivative_consistency(family):
    spec = PenaltySpec(family, lam=0.8)
    a, lam = spec.a or 0.0, spec.lam
    kinks = {lam, a * lam} if family is not PenaltyFamily.LASSO else set()
    rng = np.random.default_rng(3)
    h = 1e-7
    for t in rng.uniform(0.01, 5 * lam, size=40):
        if any(abs(t - k) < 1e-3 for k in kinks):
            continue
        num = (
            penalty_value(spec, np.array([t + h])) - penalty_value(spec, np.array([t - h]))
        ) / (2 * h)
        assert abs(num - lam * weight(spec, t)) < 1e-6


@pytest.mark.parametrize("family", [PenaltyFamily.SCAD, PenaltyFamily.MCP])
def test_weight_vanishes_exactly_at_a_lambda(family):
    spec = PenaltySpec(family, lam=1.3)
    assert weight(spec, spec.a * spec.lam) == 0.0


@settings(max_examples=60, deadline=None)
@given(
    lam=st.floats(0.05, 5.0),
    t1=st.floats(0.0, 20.0),
    t2=st.floats(0.0, 20.0),
    family=st.sampled_from(CLASS_T_FAMILIES),
)
def test_weight_monotone_property(lam, t1, t2, family):
    spec = PenaltySpec(family, lam=lam)
    lo, hi = min(t1, t2), max(t1, t2)
    assert weight(spec, lo) >= weight(spec, hi)


def test_weight_vectorizes(rng):
    spec = PenaltySpec(PenaltyFamily.MCP, lam=0.5)
    t = rng.uniform(0, 3, size=6)
    vec = weight(spec, t)
    assert np.allclose(vec, [weight(spec, float(x)) for x in t])
