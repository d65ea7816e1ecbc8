"""Two-stage sparse penalized M-estimation: an l1 contraction stage followed by
iteratively tightened folded-concave reweighting, solved by local adaptive
majorize-minimization with per-coordinate soft-thresholding."""

from .core import (
    Coefficients,
    IterationRecord,
    LossKind,
    PenaltyFamily,
    PenaltySpec,
    ProblemInstance,
    SolveResult,
    SolverConfig,
    StageTrace,
    denormalize_coefficients,
    normalize_columns,
)
from .lamm import (
    LammInflationError,
    PhiState,
    lamm_iterate,
    majorization_holds,
    objective_F,
    prox_step,
    soft_threshold,
)
from .losses import LossEval, huber_eval, logistic_eval, loss_eval, squared_eval
from .penalties import WeightVector, adaptive_weights, penalty_value, uniform_weights, weight
from .simbench import (
    BenchSummary,
    Design,
    DesignKind,
    Scenario,
    ScenarioModel,
    covariance_factor,
    cross_validate_lambda,
    default_lambda,
    example_truth,
    generate,
    metrics,
    oracle_estimator,
    run_benchmark,
    sparse_eig_bounds,
)
from .solver import SubproblemDidNotConverge, solve_subproblem, solve_tac, suboptimality

__version__ = "0.1.0"
