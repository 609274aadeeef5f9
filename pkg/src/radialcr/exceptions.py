"""Exception hierarchy for region computation."""

from __future__ import annotations


class RegionError(Exception):
    """Base class for all errors raised by radialcr."""


class DegenerateData(RegionError):
    """The data cannot support a finite, unique maximum of the likelihood."""


class ConvergenceFailure(RegionError):
    """The simplex maximizer did not converge."""


class OutOfBox(RegionError):
    """A parameter point lies outside the model's parameter box."""


class SolverError(RegionError):
    """A boundary ray could not be solved.

    Attributes:
        direction: angle(s) of the failing ray, when known.
    """

    def __init__(self, message: str, direction: tuple[float, ...] | None = None):
        super().__init__(message)
        self.direction = direction


class NonFiniteStatistic(SolverError):
    """The likelihood-ratio statistic was NaN or infinite inside the box."""

    def __init__(self, theta, direction: tuple[float, ...] | None = None):
        super().__init__(f"non-finite statistic at theta={list(theta)!r}", direction)
        self.theta = tuple(float(t) for t in theta)


class UnboundedRay(SolverError):
    """The scan cap was hit on a ray with no box face to clamp to."""
