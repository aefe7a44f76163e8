"""Pitman location estimators: evaluation, variances, and their inequalities."""

from .dist import (
    Cauchy,
    Convolution,
    DiscreteLattice,
    DistributionSpec,
    Exponential,
    Gaussian,
    Laplace,
    MomentTable,
    ProductMultivariate,
    Scaled,
    Shifted,
    Uniform,
    VectorLattice,
)
from .errors import (
    CapabilityError,
    ConfigError,
    DegenerateError,
    DomainError,
    OrderError,
    PitmanLabError,
    ShapeError,
    SingularityError,
    SizeError,
)
from .rng import DEFAULT_SEED, SeededStream

__version__ = "0.1.0"

__all__ = [
    "Cauchy",
    "Convolution",
    "DiscreteLattice",
    "DistributionSpec",
    "Exponential",
    "Gaussian",
    "Laplace",
    "MomentTable",
    "ProductMultivariate",
    "Scaled",
    "Shifted",
    "Uniform",
    "VectorLattice",
    "CapabilityError",
    "ConfigError",
    "DegenerateError",
    "DomainError",
    "OrderError",
    "PitmanLabError",
    "ShapeError",
    "SingularityError",
    "SizeError",
    "DEFAULT_SEED",
    "SeededStream",
]
