"""Exception types shared across the package."""

__all__ = [
    "QuasilocalError",
    "DegenerateMetricError",
    "NonConvexMetricError",
    "SolvabilityError",
    "SolverConvergenceError",
    "CausalCharacterError",
    "CatalogError",
]


class QuasilocalError(Exception):
    """Base class for package-specific failures."""


class DegenerateMetricError(QuasilocalError, ValueError):
    """A 2-metric is not positive definite where it must be."""


class NonConvexMetricError(QuasilocalError, ValueError):
    """A metric destined for an isometric embedding has non-positive curvature."""


class SolvabilityError(QuasilocalError, ValueError):
    """A linear problem's compatibility condition is violated."""


class SolverConvergenceError(QuasilocalError, RuntimeError):
    """An iterative solver exhausted its budget before reaching tolerance."""


class CausalCharacterError(QuasilocalError, ValueError):
    """A vector or surface fails a required causal-character condition."""


class CatalogError(QuasilocalError, ValueError):
    """Unknown catalog entry or invalid physical parameters."""
