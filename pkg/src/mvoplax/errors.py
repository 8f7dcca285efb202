"""Exception types raised across the package.

All numerical failure modes are surfaced loudly; nothing is silently
regularized.
"""

from __future__ import annotations


class MvoplaxError(Exception):
    """Base class for all package errors."""


class SingularMatrixError(MvoplaxError):
    """A linear solve met a matrix whose condition estimate exceeds the limit."""

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class SingularMomentError(MvoplaxError):
    """The block-Hankel moment system is numerically singular at this degree.

    Signals that the monic family does not (numerically) exist at this s.
    """


class DivergentMomentError(MvoplaxError):
    """Requested moment integral does not converge for these parameters."""


class DegenerateParametersError(MvoplaxError):
    """Special-family construction hit coincident denominators or zero nu."""


class StepFailureError(MvoplaxError):
    """ODE integration aborted; ``last_s`` holds the last good abscissa."""

    def __init__(self, message: str, last_s: float):
        super().__init__(message)
        self.last_s = last_s


class IterationDivergedError(MvoplaxError):
    """Discrete bootstrap drifted away from the directly computed values."""
