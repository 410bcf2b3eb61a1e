"""Fractional Poisson processes: special functions, samplers and limit-theorem experiments."""

from .errors import (
    BudgetExceeded,
    DomainError,
    FracPoisError,
    GridTooCoarse,
    NonConvergence,
    NumericalInstability,
    QuadratureFailure,
    TailLocationFailure,
)
from .laplace import DEFAULT_CONFIG, PRECISE_CONFIG, InversionConfig, LaplaceTransform, invert
from .rates import RateFunction
from .specfun import EvalAccuracy, StabilityIndex, mittag_leffler, ml_survival, stable_density_g
from .subordinator import DensityGrid, RngStream, build_density_grid, inv_stable_density

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "DomainError",
    "FracPoisError",
    "GridTooCoarse",
    "NonConvergence",
    "NumericalInstability",
    "QuadratureFailure",
    "TailLocationFailure",
    "DEFAULT_CONFIG",
    "PRECISE_CONFIG",
    "InversionConfig",
    "LaplaceTransform",
    "invert",
    "RateFunction",
    "EvalAccuracy",
    "StabilityIndex",
    "mittag_leffler",
    "ml_survival",
    "stable_density_g",
    "DensityGrid",
    "RngStream",
    "build_density_grid",
    "inv_stable_density",
]
