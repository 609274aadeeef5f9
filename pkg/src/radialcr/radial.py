"""Polar and spherical rays anchored at the MLE."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import OutOfBox
from .likelihood import FittedModel, lr_statistic

TWO_PI = 2.0 * math.pi
_FACE_SLACK = 1e-12


@dataclass(frozen=True)
class Polar:
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)

    @property
    def angles(self) -> tuple[float, ...]:
        return (self.phi,)

    def unit_vector(self) -> np.ndarray:
        return np.array([math.cos(self.phi), math.sin(self.phi)])


@dataclass(frozen=True)
class Spherical:
    """Azimuth ``phi`` in [0, 2 pi) and inclination ``tau`` in [0, pi]."""

    phi: float
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        if not 0.0 <= self.tau <= math.pi:
            raise ValueError(f"inclination tau must lie in [0, pi], got {self.tau}")

    @property
    def angles(self) -> tuple[float, ...]:
        return (self.phi, self.tau)

    def unit_vector(self) -> np.ndarray:
        s = math.sin(self.tau)
        return np.array([math.cos(self.phi) * s, math.sin(self.phi) * s, math.cos(self.tau)])


Direction = Polar | Spherical


@dataclass(frozen=True)
class RadialFrame:
    origin: np.ndarray
    direction: Direction

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float)
        expected = 2 if isinstance(self.direction, Polar) else 3
        if origin.shape != (expected,):
            raise ValueError(
                f"{type(self.direction).__name__} direction needs a {expected}-d origin, "
                f"got shape {origin.shape}"
            )
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "_unit", self.direction.unit_vector())

    @property
    def unit(self) -> np.ndarray:
        return self._unit


def frame_for(fitted: FittedModel, direction: Direction) -> RadialFrame:
    return RadialFrame(fitted.theta_hat, direction)


def to_cartesian(frame: RadialFrame, r: float) -> np.ndarray:
    """Point at distance ``r`` from the origin along the frame's direction."""
    if r < 0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    return frame.origin + r * frame.unit


def max_radius_in_box(fitted: FittedModel, frame: RadialFrame) -> float:
    """Largest ``r`` for which the ray stays inside the parameter box.

    Returns ``math.inf`` when no box face lies along the ray.
    """
    lower, upper = fitted.model.parameter_box
    best = math.inf
    for o, u, lo, hi in zip(frame.origin, frame.unit, lower, upper):
        if u > 0 and math.isfinite(hi):
            best = min(best, (hi - o) / u)
        elif u < 0 and math.isfinite(lo):
            best = min(best, (lo - o) / u)
    return best


def _snap_to_box(fitted: FittedModel, theta: np.ndarray) -> np.ndarray:
    # Points computed at the box face can overshoot by an ulp or so.
    if not fitted.model.bounded:
        return theta
    lower, upper = fitted.model.parameter_box
    span = np.maximum(1.0, np.abs(theta))
    if (theta < lower - _FACE_SLACK * span).any() or (theta > upper + _FACE_SLACK * span).any():
        raise OutOfBox(f"theta={theta.tolist()} is outside the parameter box")
    return np.minimum(np.maximum(theta, lower), upper)


def radial_lr_statistic(fitted: FittedModel, frame: RadialFrame, r: float) -> float:
    """Likelihood-ratio statistic at radius ``r`` along the frame's ray.

    Zero at ``r = 0`` since the origin is the MLE.

    Raises:
        OutOfBox: if the mapped point leaves the parameter box.
    """
    theta = _snap_to_box(fitted, to_cartesian(frame, r))
    return lr_statistic(fitted, theta)
