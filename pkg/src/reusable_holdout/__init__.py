"""Reusable holdout mechanisms, generalization bounds and overfitting experiments."""

from reusable_holdout.errors import InvalidParameterError, ReconstructionError, ResourceError
from reusable_holdout.noise import NoiseKind, NoiseSource
from reusable_holdout.queries import StatisticalQuery, empirical_mean
from reusable_holdout.mechanisms import (
    BOTTOM,
    EXHAUSTED,
    SparseValidate,
    Thresholdout,
    ThresholdoutConfig,
    sparse_validate_failure_bound,
    thresholdout_params,
)

__version__ = "0.1.0"

__all__ = [
    "BOTTOM",
    "EXHAUSTED",
    "InvalidParameterError",
    "NoiseKind",
    "NoiseSource",
    "ReconstructionError",
    "ResourceError",
    "SparseValidate",
    "StatisticalQuery",
    "Thresholdout",
    "ThresholdoutConfig",
    "empirical_mean",
    "sparse_validate_failure_bound",
    "thresholdout_params",
]
