"""Shared domain types: problem data, coefficient vectors, penalty and solver settings."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np


class LossKind(enum.Enum):
    SQUARED = "squared"
    LOGISTIC = "logistic"
    HUBER = "huber"


class PenaltyFamily(enum.Enum):
    LASSO = "lasso"
    SCAD = "scad"
    MCP = "mcp"
    CAPPED_L1 = "capped_l1"
    ADAPTIVE_RECIP = "adaptive_recip"


#: default concavity parameter per family (ignored for LASSO / ADAPTIVE_RECIP)
DEFAULT_CONCAVITY = {
    PenaltyFamily.SCAD: 3.7,
    PenaltyFamily.MCP: 3.0,
    PenaltyFamily.CAPPED_L1: 3.0,
}


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ProblemInstance:
    """Design matrix, responses and the loss they enter.

    ``X`` is n-by-d with one sample per row; ``y`` holds real responses for the
    squared/Huber losses and labels in {-1, +1} for the logistic loss.
    ``column_scales`` records the divisors applied by :func:`normalize_columns`
    (all ones when no normalization was applied), so a coefficient vector fit on
    the normalized design maps back via ``beta_original = beta / column_scales``.
    ``huber_alpha`` is the Huber cutoff parameter: the per-residual loss is
    quadratic on ``|x| <= 1/alpha`` and linear beyond.
    """

    X: np.ndarray
    y: np.ndarray
    loss_kind: LossKind
    huber_alpha: float | None = None
    column_scales: np.ndarray | None = None

    def __post_init__(self):
        X = _readonly(self.X)
        y = _readonly(self.y)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 1 or d < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got X of shape {X.shape}")
        if y.shape != (n,):
            raise ValueError(f"y has length {y.shape}, expected ({n},)")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite entries")
        if self.loss_kind is LossKind.LOGISTIC and not np.all(np.abs(y) == 1.0):
            raise ValueError("logistic loss requires labels in {-1, +1}")
        if self.loss_kind is LossKind.HUBER:
            if self.huber_alpha is None or not self.huber_alpha > 0:
                raise ValueError("Huber loss requires a positive cutoff parameter")
        if self.column_scales is None:
            scales = np.ones(d)
            scales.setflags(write=False)
        else:
            scales = _readonly(self.column_scales)
            if scales.shape != (d,):
                raise ValueError("column_scales has wrong length")
            if not np.all(scales > 0):
                raise ValueError("column_scales must be positive")
            if np.any(scales != 1.0):
                norms = np.linalg.norm(X, axis=0)
                if norms.max() > math.sqrt(n) + 1e-8:
                    raise ValueError("normalized instance has a column norm above sqrt(n)")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "column_scales", scales)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def with_loss(self, loss_kind: LossKind, huber_alpha: float | None = None) -> "ProblemInstance":
        """Same data under a different loss (used to cross robust/non-robust fits)."""
        return replace(self, loss_kind=loss_kind, huber_alpha=huber_alpha)


@dataclass(frozen=True)
class Coefficients:
    """A dense coefficient vector; the support is the set of exact zeros' complement.

    Soft-thresholding produces exact zeros, so no tolerance enters the support.
    """

    beta: np.ndarray

    def __post_init__(self):
        beta = _readonly(self.beta)
        if beta.ndim != 1:
            raise ValueError("beta must be a vector")
        object.__setattr__(self, "beta", beta)

    @property
    def support(self) -> frozenset:
        return frozenset(np.flatnonzero(self.beta).tolist())

    @property
    def d(self) -> int:
        return self.beta.shape[0]

    @staticmethod
    def zeros(d: int) -> "Coefficients":
        return Coefficients(np.zeros(d))


def beta_of(x) -> np.ndarray:
    """Unwrap a Coefficients or pass an array through as a float vector."""
    if isinstance(x, Coefficients):
        return x.beta
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family with regularization level ``lam`` and concavity parameter ``a``."""

    family: PenaltyFamily
    lam: float
    a: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        a = self.a
        if a is None:
            a = DEFAULT_CONCAVITY.get(self.family)
        if self.family is PenaltyFamily.SCAD and not a > 2:
            raise ValueError("SCAD requires a > 2")
        if self.family in (PenaltyFamily.MCP, PenaltyFamily.CAPPED_L1) and not a > 1:
            raise ValueError(f"{self.family.value} requires a > 1")
        object.__setattr__(self, "a", a)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the two-stage solver.

    ``eps_c`` (contraction tolerance) and ``eps_t`` (tightening tolerance)
    default to sqrt(log d / n) and sqrt(1 / n); since those depend on the
    problem size they may be left as None and resolved against an instance.
    """

    lam: float
    phi0: float = 1e-6
    gamma_u: float = 2.0
    eps_c: float | None = None
    eps_t: float | None = None
    t_max: int = 15
    k_max: int = 10000
    initial_beta: np.ndarray | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.phi0 > 0:
            raise ValueError("phi0 must be positive")
        if not self.gamma_u > 1:
            raise ValueError("gamma_u must exceed 1")
        if self.t_max < 1 or self.k_max < 1:
            raise ValueError("t_max and k_max must be at least 1")
        if self.eps_c is not None and not self.eps_c > 0:
            raise ValueError("eps_c must be positive")
        if self.eps_t is not None and not self.eps_t > 0:
            raise ValueError("eps_t must be positive")
        if self.eps_c is not None and self.eps_t is not None and self.eps_t > self.eps_c:
            raise ValueError("eps_t must not exceed eps_c")
        if self.initial_beta is not None:
            object.__setattr__(self, "initial_beta", _readonly(self.initial_beta))

    def resolved(self, n: int, d: int) -> "SolverConfig":
        """Fill size-dependent defaults for a given problem shape."""
        eps_c = self.eps_c if self.eps_c is not None else math.sqrt(math.log(d) / n)
        eps_t = self.eps_t if self.eps_t is not None else math.sqrt(1.0 / n)
        eps_t = min(eps_t, eps_c)
        init = self.initial_beta if self.initial_beta is not None else np.zeros(d)
        if init.shape != (d,):
            raise ValueError(f"initial_beta has length {init.shape[0]}, expected {d}")
        return replace(self, eps_c=eps_c, eps_t=eps_t, initial_beta=init)


@dataclass(frozen=True)
class IterationRecord:
    """One accepted LAMM update inside a stage."""

    k: int
    phi: float
    objective: float
    omega: float
    step_norm: float
    inflations: int


@dataclass(frozen=True)
class StageTrace:
    """Per-iteration records for one subproblem; ``records[0]`` is the k=0 entry
    describing the stage's starting point. Objective values are non-increasing
    in k. ``iterates`` is populated only when iterate retention was requested.
    """

    stage: int
    records: tuple[IterationRecord, ...]
    iterates: tuple[np.ndarray, ...] | None = None

    @property
    def iterations(self) -> int:
        return self.records[-1].k if self.records else 0


@dataclass(frozen=True)
class SolveResult:
    """Estimates and instrumentation of a full two-stage solve."""

    per_stage_estimates: tuple[Coefficients, ...]
    traces: tuple[StageTrace, ...]
    final_weights: np.ndarray
    total_lamm_iterations: int

    def __post_init__(self):
        if len(self.per_stage_estimates) != len(self.traces):
            raise ValueError("one trace per stage estimate required")
        object.__setattr__(self, "final_weights", _readonly(self.final_weights))

    @property
    def final(self) -> Coefficients:
        return self.per_stage_estimates[-1]

    @property
    def stages_run(self) -> int:
        return len(self.per_stage_estimates)


def normalize_columns(instance: ProblemInstance) -> ProblemInstance:
    """Rescale each nonzero column of X to Euclidean norm sqrt(n).

    All-zero columns are left untouched with scale 1. The returned instance's
    ``column_scales`` holds the applied divisors, so that predictions round-trip:
    ``X_normalized @ beta == X_original @ (beta / column_scales)``.
    """
    X = instance.X
    n = instance.n
    norms = np.linalg.norm(X, axis=0)
    scales = np.where(norms > 0, norms / math.sqrt(n), 1.0)
    X_new = X / scales
    return replace(instance, X=X_new, column_scales=instance.column_scales * scales)


def denormalize_coefficients(beta, column_scales) -> np.ndarray:
    """Map coefficients fit on a normalized design back to the original columns."""
    return beta_of(beta) / np.asarray(column_scales, dtype=float)
