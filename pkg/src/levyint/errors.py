"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(ToolkitError, ValueError):
    """Invalid model or simulation parameters."""


class GridError(ToolkitError, ValueError):
    """Invalid time grid, or partition points not contained in a grid."""


class EmptyEnsembleError(ToolkitError, ValueError):
    """Operation applied to an ensemble with no paths or no grid points."""


class ConsistencyError(ToolkitError, ValueError):
    """Mismatched ensembles: different grids, shapes, or originating specs."""


class AdaptednessError(ToolkitError, ValueError):
    """Integrand is not flagged as adapted."""


class MissingJumpDataError(ToolkitError, ValueError):
    """Left limits requested for a discontinuous ensemble without jump records."""


class InsufficientDataError(ToolkitError, ValueError):
    """Not enough meshes or samples for the requested study."""


class DomainError(ToolkitError, ValueError):
    """Input outside the mathematical domain of the operation."""


class NumericError(ToolkitError, ArithmeticError):
    """NaN, overflow, or degenerate sampling detected during a computation."""


class ConfigError(ToolkitError, ValueError):
    """Malformed or contradictory experiment configuration."""
