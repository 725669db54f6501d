"""Shared exception types."""

from __future__ import annotations


class DimensionMismatchError(ValueError):
    """Operands describe incompatible alphabets."""


class InvalidDistributionError(ValueError):
    """Input failed a nonnegativity or normalization check."""


class MalformedInputError(ValueError):
    """A problem file or CLI argument could not be interpreted."""


class SizeCapError(ValueError):
    """A desk-scale size cap would be exceeded."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    Carries the best numerical bracket known at the time of failure so the
    caller can still report partial information.
    """

    def __init__(self, message: str, lower: float | None = None,
                 upper: float | None = None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class EmptyFeasibleSetError(RuntimeError):
    """A feasibility precondition failed; carries the blocking certificate."""

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class CompositionOrderError(RuntimeError):
    """Composition of two certified relations failed its membership check.

    Composing two valid couplings is expected to stay inside the combined
    constraint set; reaching this error indicates corrupted certificates or
    inconsistent metrics, not a routine infeasibility.
    """
