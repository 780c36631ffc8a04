"""Exception types shared across the package."""


class HeatctlError(Exception):
    """Base class for all package errors."""


class ParameterError(HeatctlError, ValueError):
    """An argument is outside the operation's admissible range."""


class CapacityError(HeatctlError):
    """A requested truncation exceeds the configured mode budget."""


class NumericError(HeatctlError):
    """A numerical routine produced non-finite or inconsistent values."""


class ConditioningError(HeatctlError):
    """A Gramian is too ill-conditioned to invert reliably."""

    def __init__(self, message, condition_number):
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number


class FidelityError(HeatctlError):
    """A basis embedding loses more mass than the allowed tolerance."""


class DegenerateSetError(HeatctlError):
    """An observability set gives a vanishing empirical constant."""
