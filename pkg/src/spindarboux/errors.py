"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class SpinDarbouxError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(SpinDarbouxError, ValueError):
    """Invalid user input (grid, config, parameter ranges)."""


class NumericalSingularityError(SpinDarbouxError, ArithmeticError):
    """A quantity that must stay finite/nonzero hits a zero or pole.

    ``times`` holds the grid times where the problem was detected.
    """

    def __init__(self, message: str, times=()):
        self.times = tuple(float(t) for t in times)
        if self.times:
            shown = ", ".join(f"{t:.6g}" for t in self.times[:8])
            more = "" if len(self.times) <= 8 else f", ... ({len(self.times)} total)"
            message = f"{message} at t = {shown}{more}"
        super().__init__(message)


class IntegrationDomainError(NumericalSingularityError):
    """Non-finite coefficient met while integrating an ODE."""


class SingularCoefficientError(NumericalSingularityError):
    """A potential that appears in a denominator vanishes."""


class ChiZeroCrossingError(NumericalSingularityError):
    """An auxiliary chi solution (or q) changes sign on the grid."""


class DegenerateChainError(NumericalSingularityError):
    """A Wronskian or determinant of a transformation chain vanishes."""


class DegenerateSolutionError(NumericalSingularityError):
    """A solution has zero norm where it must be normalized."""


class RealityViolationError(NumericalSingularityError):
    """A transformed potential has a non-negligible imaginary part."""


class UnsupportedRegimeError(ValidationError):
    """Parameters outside the regime a closed form covers."""


class CapabilityError(SpinDarbouxError):
    """More derivatives requested than a potential can supply."""


class PreconditionError(SpinDarbouxError):
    """An input violates an operation's documented precondition."""
