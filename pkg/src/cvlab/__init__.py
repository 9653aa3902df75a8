"""Contextual values for generalized quantum measurements.

Solve ``sum_j alpha_j E_j = A`` for contextual values, evaluate postselected
conditioned averages over a weakness parameter ``g`` and extrapolate their
``g -> 0`` limits.
"""

from .contextual import ContextualValueEstimator, CvFamily, CvSolution, cv_family, divergence_order, solve_cv
from .exceptions import (
    CvlabError,
    DegenerateError,
    DegenerateOutcomeError,
    DegeneratePostselectionError,
    DimensionError,
    DomainError,
    EvaluationError,
    ExprSyntaxError,
    ModelError,
    ScenarioError,
)
from .expr import ParamExpr, evaluate, parse
from .linalg import matrix_sqrt, polar_decompose, pseudoinverse, spectral_decompose
from .measurement import (
    MeasurementFamily,
    coarse_grain,
    disturbance_diagnostics,
    evaluate_family,
    naimark_dilate,
    post_state,
    povm,
    probability,
)
from .scenario import load_scenario
from .weak import (
    LimitEstimate,
    conditioned_average,
    counterexample_sec9,
    counterexample_sec12,
    traditional_weak_value,
    weak_limit,
    weak_value_generalized,
)

__all__ = [
    "ContextualValueEstimator",
    "CvFamily",
    "CvSolution",
    "CvlabError",
    "DegenerateError",
    "DegenerateOutcomeError",
    "DegeneratePostselectionError",
    "DimensionError",
    "DomainError",
    "EvaluationError",
    "ExprSyntaxError",
    "LimitEstimate",
    "MeasurementFamily",
    "ModelError",
    "ParamExpr",
    "ScenarioError",
    "coarse_grain",
    "conditioned_average",
    "counterexample_sec12",
    "counterexample_sec9",
    "cv_family",
    "disturbance_diagnostics",
    "divergence_order",
    "evaluate",
    "evaluate_family",
    "load_scenario",
    "matrix_sqrt",
    "naimark_dilate",
    "parse",
    "polar_decompose",
    "post_state",
    "povm",
    "probability",
    "pseudoinverse",
    "solve_cv",
    "spectral_decompose",
    "traditional_weak_value",
    "weak_limit",
    "weak_value_generalized",
]

__version__ = "0.1.0"
