"""Projection logic with an anchored implication, and event-indexed contraction experiments."""

from .errors import (
    AnchorlabError,
    CertificationError,
    ConfigError,
    ConvergenceError,
    DimensionError,
    FixedPointError,
    InvariantError,
    MetadataError,
    NotHermitianError,
    PreconditionError,
    PremiseError,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorlabError",
    "CertificationError",
    "ConfigError",
    "ConvergenceError",
    "DimensionError",
    "FixedPointError",
    "InvariantError",
    "MetadataError",
    "NotHermitianError",
    "PreconditionError",
    "PremiseError",
    "__version__",
]
