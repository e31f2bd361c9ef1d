"""Sparse multi-task linear regression with an unbalanced optimal
transport consensus penalty, plus baseline estimators and a synthetic
benchmark harness."""

from .core import (
    FitReport,
    GroundMetric,
    MtwHyperparams,
    MultiTaskProblem,
    resolve_epsilon,
    resolve_gamma,
    validate_problem,
)
from .ot import (
    BarycenterResult,
    Kernel,
    ScalingState,
    barycenter,
    barycenter_log,
    build_kernel,
    unbalanced_distance,
)
from .proxcd import CdState, ProxParams, cd_update, prox_g
from .solver import MtwModel, SolverState, evaluate_loss, fit, \
    warm_start_transfer
from .baselines import DirtyParams, dirty_grid, fit_dirty, fit_lasso
from .simulate import GridScenario, GroundTruth, make_design, make_truth
from .metrics import EvalResult, evaluate_estimate, pr_auc

__version__ = "0.1.0"

__all__ = [
    "FitReport", "GroundMetric", "MtwHyperparams", "MultiTaskProblem",
    "resolve_epsilon", "resolve_gamma", "validate_problem",
    "BarycenterResult", "Kernel", "ScalingState", "barycenter",
    "barycenter_log", "build_kernel", "unbalanced_distance",
    "CdState", "ProxParams", "cd_update", "prox_g",
    "MtwModel", "SolverState", "evaluate_loss", "fit",
    "warm_start_transfer",
    "DirtyParams", "dirty_grid", "fit_dirty", "fit_lasso",
    "GridScenario", "GroundTruth", "make_design", "make_truth",
    "EvalResult", "evaluate_estimate", "pr_auc",
    "__version__",
]
