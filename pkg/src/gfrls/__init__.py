"""Recursive least squares with generalized forgetting, plus stability and robustness checks."""

from .core import (
    BatchAccumulator,
    EstimatorState,
    Sample,
    StepDiagnostics,
    Trajectory,
    batch_accumulate,
    batch_minimizer,
    init,
    init_from_info,
    new_accumulator,
    propagate,
    step,
)
from .estimator import GFRLSRegressor
from .excitation import ExcitationReport, certify_excitation, smallest_window, transfer_bounds, weighted_regressor
from .exceptions import (
    ConfigError,
    DimensionMismatch,
    EmptySequence,
    EmptyTrajectory,
    GFRLSError,
    IllPosedForgetting,
    InsufficientData,
    InvalidParameter,
    MissingCondition,
    NotPositiveDefinite,
    NotSymmetric,
    SchemaError,
    UnsupportedDimension,
)
from .forgetting import *  # noqa: F401,F403
from .forgetting import __all__ as _forgetting_all
from .guarantees import (
    ConditionProfile,
    NoiseProfile,
    RobustnessBound,
    StabilityTier,
    classify_stability,
    compute_bound,
    eiv_bound,
    guarantee_report,
    lyapunov_decrease_residuals,
    max_covariance,
    window_decrease_margins,
    profile_conditions,
    robustness_bound,
    weighted_noise_bounds,
)
from .simulation import RunRecord, ScenarioSpec, fit_exponential_rate, generate, run, run_grid

__version__ = "0.1.0"

__all__ = [
    "BatchAccumulator", "EstimatorState", "Sample", "StepDiagnostics", "Trajectory",
    "batch_accumulate", "batch_minimizer", "init", "init_from_info", "new_accumulator", "propagate", "step",
    "GFRLSRegressor",
    "ExcitationReport", "certify_excitation", "smallest_window", "transfer_bounds", "weighted_regressor",
    "ConfigError", "DimensionMismatch", "EmptySequence", "EmptyTrajectory", "GFRLSError", "IllPosedForgetting",
    "InsufficientData", "InvalidParameter", "MissingCondition", "NotPositiveDefinite", "NotSymmetric",
    "SchemaError", "UnsupportedDimension",
    "ConditionProfile", "NoiseProfile", "RobustnessBound", "StabilityTier", "classify_stability",
    "compute_bound", "eiv_bound", "guarantee_report", "lyapunov_decrease_residuals", "max_covariance",
    "profile_conditions", "window_decrease_margins",
    "robustness_bound", "weighted_noise_bounds",
    "RunRecord", "ScenarioSpec", "fit_exponential_rate", "generate", "run", "run_grid",
] + list(_forgetting_all)
