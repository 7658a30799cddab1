"""Exception hierarchy shared by the library and the CLI."""

from typing import Optional


class TkoError(Exception):
    """Base class for all tko-noise errors."""


class ValidationError(TkoError, ValueError):
    """Invalid parameters: bad delays, short signals, non-symmetric or singular matrices."""


class ConvergenceError(TkoError):
    """Numerical integration failed to reach the requested accuracy."""

    def __init__(self, message: str, error_estimate: Optional[float] = None) -> None:
        super().__init__(message)
        self.error_estimate = error_estimate


class PreconditionError(TkoError):
    """A statistical precondition does not hold (e.g. the denominator is often negative)."""

    def __init__(self, message: str, estimate: Optional[float] = None) -> None:
        super().__init__(message)
        self.estimate = estimate
