"""Exception types shared across the package."""


class RapwalkError(Exception):
    """Base class for all package errors."""


class InvalidLaw(RapwalkError, ValueError):
    """Weight-law parameters are malformed or violate realizability."""


class UnsupportedLaw(RapwalkError, ValueError):
    """Operation requires a law shape (e.g. support {-1,0}) this law lacks."""


class SpanViolation(RapwalkError, ValueError):
    """Annealed step distribution does not have lattice span 1."""


class QuadratureFailure(RapwalkError, ArithmeticError):
    """Adaptive quadrature exceeded its refinement depth budget."""


class DomainError(RapwalkError, ValueError):
    """Argument outside the mathematical domain (negative time/variance)."""


class CapacityError(RapwalkError, MemoryError):
    """Requested computation exceeds the configured memory/state budget."""


class NoConvergence(RapwalkError, ArithmeticError):
    """Iterative limit did not stabilize within the horizon budget.

    Carries the last two iterates so callers can judge how far off it was.
    """

    def __init__(self, msg, last_two=None):
        super().__init__(msg)
        self.last_two = last_two


class TimeUnderflow(RapwalkError, ValueError):
    """Backward walk would need environment rows below level 0."""


class ProfileError(RapwalkError, ValueError):
    """Initial-increment profile is invalid (e.g. negative variance)."""


class WindowExhausted(RapwalkError, ValueError):
    """Height window shrank below the span required by the observations."""


class ConfigError(RapwalkError, ValueError):
    """Experiment config is invalid; message names the offending field."""


class InsufficientReplicates(RapwalkError, ValueError):
    """Fewer replicates than the estimator needs."""


class DegenerateInput(RapwalkError, ValueError):
    """Input data degenerate for the requested fit (e.g. variance <= 0)."""


class IoError(RapwalkError, OSError):
    """Output path could not be written; message names the path."""
