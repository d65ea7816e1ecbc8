"""Folded-concave weight functions and the adaptive weight vectors they induce.

The tightening class contains weights w: [0, inf) -> [0, 1], non-increasing,
with w(0) = 1; each stage re-penalizes coordinate j at lam * w(|beta_j|).
The classical reciprocal adaptive-lasso weight falls outside the class: it is
unbounded near zero and freezes exact zeros, represented here by a +inf entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Coefficients, PenaltyFamily, PenaltySpec, beta_of


#: families whose weight function belongs to the tightening class
CLASS_T = (
    PenaltyFamily.LASSO,
    PenaltyFamily.SCAD,
    PenaltyFamily.MCP,
    PenaltyFamily.CAPPED_L1,
)


@dataclass(frozen=True)
class WeightVector:
    """Per-coordinate regularization levels; +inf freezes a coordinate at zero."""

    lamvec: np.ndarray

    def __post_init__(self):
        v = np.array(self.lamvec, dtype=float)
        if v.ndim != 1:
            raise ValueError("weight vector must be 1-D")
        if np.any(v < 0) or np.any(np.isnan(v)):
            raise ValueError("weights must be non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "lamvec", v)

    @property
    def frozen(self) -> np.ndarray:
        return np.isinf(self.lamvec)


def lamvec_of(w) -> np.ndarray:
    if isinstance(w, WeightVector):
        return w.lamvec
    return np.asarray(w, dtype=float)


def weight(spec: PenaltySpec, t):
    """w(t) = lam^{-1} p'_lam(t) for the class-T families, scalar or elementwise.

    LASSO: 1. SCAD(a): 1 on t <= lam, then (a*lam - t)+ / ((a-1)*lam).
    MCP(a): (1 - t/(a*lam))+. Capped-l1(a): indicator of t < a*lam.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("weight is defined for non-negative magnitudes only")
    lam, a = spec.lam, spec.a
    if spec.family is PenaltyFamily.LASSO:
        out = np.ones_like(t_arr)
    elif spec.family is PenaltyFamily.SCAD:
        out = np.where(
            t_arr <= lam, 1.0, np.maximum(a * lam - t_arr, 0.0) / ((a - 1.0) * lam)
        )
    elif spec.family is PenaltyFamily.MCP:
        out = np.maximum(1.0 - t_arr / (a * lam), 0.0)
    elif spec.family is PenaltyFamily.CAPPED_L1:
        out = np.where(t_arr < a * lam, 1.0, 0.0)
    else:
        raise ValueError("reciprocal adaptive weights are handled by adaptive_weights only")
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out)
    return out


def adaptive_weights(spec: PenaltySpec, beta_prev) -> WeightVector:
    """Weight vector lam_j = lam * w(|beta_prev_j|) for the next subproblem.

    For the reciprocal family the entry is lam / |beta_j|, with +inf marking
    coordinates at exact zero: those stay pinned at zero ever after.
    """
    b = np.abs(beta_of(beta_prev))
    if spec.family is PenaltyFamily.ADAPTIVE_RECIP:
        with np.errstate(divide="ignore"):
            lamvec = np.where(b > 0, spec.lam / np.where(b > 0, b, 1.0), np.inf)
        return WeightVector(lamvec)
    return WeightVector(spec.lam * weight(spec, b))


def uniform_weights(lam: float, d: int) -> WeightVector:
    """The contraction-stage weights lam * 1."""
    return WeightVector(np.full(d, float(lam)))


def penalty_value(spec: PenaltySpec, beta) -> float:
    """Total penalty sum_j p_lam(|beta_j|), using the standard closed forms."""
    t = np.abs(beta_of(beta))
    lam, a = spec.lam, spec.a
    if spec.family is PenaltyFamily.LASSO:
        per = lam * t
    elif spec.family is PenaltyFamily.SCAD:
        per = np.where(
            t <= lam,
            lam * t,
            np.where(
                t <= a * lam,
                (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0)),
                (a + 1.0) * lam * lam / 2.0,
            ),
        )
    elif spec.family is PenaltyFamily.MCP:
        per = np.where(t <= a * lam, lam * t - t * t / (2.0 * a), a * lam * lam / 2.0)
    elif spec.family is PenaltyFamily.CAPPED_L1:
        per = lam * np.minimum(t, a * lam)
    else:
        raise ValueError("the reciprocal adaptive weight has no finite penalty")
    return float(per.sum())
