"""Track temporal transitions of vector sets through random-Fourier-feature density weights."""

from rfftrack.density import DensityFit, GridDensity, count_modes, evaluate_grid, log_unnormalized_density
from rfftrack.errors import (
    ConfigError,
    DataError,
    InsufficientDataError,
    InvalidArgumentError,
    NumericError,
)
from rfftrack.inference import MHConfig, NoiseConfig, fit_series, fit_weights
from rfftrack.rff_basis import FeatureBasis, PhaseRange, design_matrix, eval_features, sample_basis
from rfftrack.series import VectorSetSeries
from rfftrack.trajectory import TrajectoryProjection, explained_variance, fit_pca, inverse_map, project

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "DensityFit",
    "FeatureBasis",
    "GridDensity",
    "InsufficientDataError",
    "InvalidArgumentError",
    "MHConfig",
    "NoiseConfig",
    "NumericError",
    "PhaseRange",
    "TrajectoryProjection",
    "VectorSetSeries",
    "count_modes",
    "design_matrix",
    "eval_features",
    "evaluate_grid",
    "explained_variance",
    "fit_pca",
    "fit_series",
    "fit_weights",
    "inverse_map",
    "log_unnormalized_density",
    "project",
    "sample_basis",
]
