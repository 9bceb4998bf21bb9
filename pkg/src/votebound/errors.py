"""Exception types shared across the package."""


class VoteBoundError(Exception):
    """Base class for all errors raised by votebound."""


class ConfigError(VoteBoundError, ValueError):
    """Inputs are inconsistent (shape mismatch, bad label space, bad parameter)."""


class BoundUndefined(VoteBoundError):
    """A bound's hypothesis (a strictly positive first moment) does not hold."""

    def __init__(self, message, variant=None, offending_class=None):
        super().__init__(message)
        self.variant = variant
        self.offending_class = offending_class


class InvariantViolation(VoteBoundError, AssertionError):
    """A mathematical invariant that must hold was observed to fail."""
