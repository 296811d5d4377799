"""stressrelease - simulation and reciprocal moments of the extrinsic stress-release process."""

__version__ = "0.1.0"

from .core_model import (
    Event,
    EventKind,
    EventLog,
    JumpDist,
    ModelParams,
    compensator,
    exp_moment,
    intensity_at,
    log_intensity_at,
    validate,
)
from .errors import DivergentMomentError, MomentError, ParameterError, StabilityError, StressReleaseError
from .exact_sim import (
    interarrival_cdf,
    inverse_interarrival_cdf,
    lambert_w0,
    sample_composition,
    simulate_batch,
    simulate_path,
    simulate_path_inverse,
)
from .moments import MomentCurve, MomentParams, covariance, product_moment, theta1, theta2, theta_k_recursive
from .montecarlo import McConfig, McEstimate, SimMethod, compare_estimators, estimate_reciprocal_moment
from .thinning_sim import grid_search_delta, simulate_path_thinning, upper_bound

__all__ = [
    "DivergentMomentError",
    "Event",
    "EventKind",
    "EventLog",
    "JumpDist",
    "McConfig",
    "McEstimate",
    "ModelParams",
    "MomentCurve",
    "MomentError",
    "MomentParams",
    "ParameterError",
    "SimMethod",
    "StabilityError",
    "StressReleaseError",
    "compare_estimators",
    "compensator",
    "covariance",
    "estimate_reciprocal_moment",
    "exp_moment",
    "grid_search_delta",
    "intensity_at",
    "interarrival_cdf",
    "inverse_interarrival_cdf",
    "lambert_w0",
    "log_intensity_at",
    "product_moment",
    "sample_composition",
    "simulate_batch",
    "simulate_path",
    "simulate_path_inverse",
    "simulate_path_thinning",
    "theta1",
    "theta2",
    "theta_k_recursive",
    "upper_bound",
    "validate",
    "__version__",
]
