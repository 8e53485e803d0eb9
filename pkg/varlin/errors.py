"""Exception hierarchy for varlin.

Every error carries the process exit code the CLI reports for it.
"""


class VarlinError(Exception):
    """Base class for all varlin errors."""

    exit_code = 1


class ConfigError(VarlinError):
    """Malformed configuration, model file or model parameters."""

    exit_code = 2


class ValidationError(ConfigError, ValueError):
    """A model or profile failed validation.

    Args:
        message: Human readable description.
        index: Offending index (1-based) when one can be named.
    """

    def __init__(self, message: str, index: int | None = None):
        if index is not None:
            message = f"{message} (index {index})"
        super().__init__(message)
        self.index = index


class UsageError(ConfigError):
    """Unknown command, plot id or option value."""


class PreconditionError(VarlinError):
    """An operation was called outside its domain."""

    exit_code = 3


class InfeasibleMixingError(PreconditionError):
    """No separation lag r <= n satisfies the rho summability condition."""


class DegenerateVarianceError(PreconditionError):
    """Var(S_n) is too small to hold a single block."""


class DomainError(PreconditionError, ValueError):
    """Argument outside its mathematical domain."""


class InsufficientDataError(PreconditionError):
    """Not enough points for a fit."""


class MissingDataError(PreconditionError):
    """A required coefficient sequence is absent."""


class UnsupportedModelError(PreconditionError):
    """Operation requires a model kind the given model is not."""


class UnsupportedOrderError(PreconditionError):
    """Moment or norm order outside the supported range."""


class InvariantViolationError(VarlinError):
    """A certified inequality failed; indicates a bug or an invalid profile.

    Args:
        check_id: Identifier of the failing check.
        message: Description with the measured values.
    """

    exit_code = 4

    def __init__(self, check_id: str, message: str):
        super().__init__(f"[{check_id}] {message}")
        self.check_id = check_id


class ConstructionError(InvariantViolationError):
    """A model builder could not meet its target property."""


class ResourceBudgetError(VarlinError):
    """State space, lattice or enumeration exceeds the configured budget."""

    exit_code = 5


__all__ = [
    "VarlinError",
    "ConfigError",
    "ValidationError",
    "UsageError",
    "PreconditionError",
    "InfeasibleMixingError",
    "DegenerateVarianceError",
    "DomainError",
    "InsufficientDataError",
    "MissingDataError",
    "UnsupportedModelError",
    "UnsupportedOrderError",
    "InvariantViolationError",
    "ConstructionError",
    "ResourceBudgetError",
]
