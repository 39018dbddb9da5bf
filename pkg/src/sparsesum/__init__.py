"""Adaptive estimation of the coordinate sum of a sparse vector observed in
Gaussian noise: thresholded estimators with data-driven scale selection, a
robust noise-level estimate, rate and lower-bound formulas, concentration
utilities, and a reproducible Monte Carlo verification harness."""

__version__ = "0.1.0"

from .estimators import (
    EstimatorConfig,
    SelectionTrace,
    adaptive_estimator,
    adaptive_estimator_unknown_sigma,
    collection_estimator,
    collection_estimator_unknown_sigma,
    oracle_estimator,
    select_s_hat,
    sigma_hat,
)
from .model import (
    ObservationVector,
    RngStream,
    SparseSignal,
    linear_functional,
    sample_from_gaussian_prior,
    sample_from_spike_prior,
    sample_observation,
)
from .rates import (
    LowerBoundQuery,
    LowerBoundValue,
    RateQuery,
    lower_bound_value,
    omega,
    phi_L,
    phi_ratio,
    psi_star,
    rho_lower_bound,
    s_zero,
)

__all__ = [
    "__version__",
    "EstimatorConfig",
    "SelectionTrace",
    "ObservationVector",
    "RngStream",
    "SparseSignal",
    "RateQuery",
    "LowerBoundQuery",
    "LowerBoundValue",
    "adaptive_estimator",
    "adaptive_estimator_unknown_sigma",
    "collection_estimator",
    "collection_estimator_unknown_sigma",
    "oracle_estimator",
    "select_s_hat",
    "sigma_hat",
    "linear_functional",
    "sample_from_gaussian_prior",
    "sample_from_spike_prior",
    "sample_observation",
    "lower_bound_value",
    "omega",
    "phi_L",
    "phi_ratio",
    "psi_star",
    "rho_lower_bound",
    "s_zero",
]
