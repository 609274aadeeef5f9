"""Per-ray boundary search and assembly of 2-d and 3-d confidence regions.

Each ray is scanned outward from the MLE in fixed steps until the statistic
first reaches the chi-squared threshold; Brent's method then refines the
crossing inside that first bracket.  Scanning first is what makes the result
the *smallest* crossing radius even when the statistic is not monotone along
the ray.  A ray that leaves the parameter box before crossing is clamped to
the box face.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import geometry
from .exceptions import NonFiniteStatistic, SolverError, UnboundedRay
from .likelihood import FittedModel
from .radial import Direction, Polar, RadialFrame, Spherical, frame_for, max_radius_in_box, \
    radial_lr_statistic, to_cartesian
from .special import chi_squared_quantile

DEFAULT_ANGLES = 180
DEFAULT_PHI = 72
DEFAULT_TAU = 36
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for :func:`solve_ray`.

    ``scan_step`` and ``r_tolerance`` are in units of ``r_scale``; when
    ``r_scale`` is None it comes from the model's standard-error proxies
    (geometric mean), or 1.0 if the model has none.
    """

    scan_step: float = 0.1
    r_tolerance: float = 1e-9
    stat_tolerance: float = 1e-6
    scan_cap: int = 10_000
    r_scale: float | None = None
    lattice: str = "latlong"
    workers: int = 1

    def __post_init__(self):
        if not self.scan_step > 0:
            raise ValueError("scan_step must be positive")
        if not self.r_tolerance > 0 or not self.stat_tolerance > 0:
            raise ValueError("tolerances must be positive")
        if self.scan_cap < 1:
            raise ValueError("scan_cap must be at least 1")
        if self.r_scale is not None and not self.r_scale > 0:
            raise ValueError("r_scale must be positive")
        if self.lattice not in ("latlong", "fibonacci"):
            raise ValueError(f"unknown lattice {self.lattice!r}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(frozen=True)
class BoundaryPoint:
    theta: np.ndarray
    r: float
    direction: Direction
    statistic: float
    clamped: bool


@dataclass
class ConfidenceRegion:
    points: list[BoundaryPoint]
    alpha: float
    dof: int
    threshold: float
    n_evaluations: int
    wall_time: float
    theta_hat: np.ndarray = field(default_factory=lambda: np.zeros(0))
    parameter_names: tuple[str, ...] = ()

    def coordinates(self) -> np.ndarray:
        return np.array([pt.theta for pt in self.points])

    def radii(self) -> np.ndarray:
        return np.array([pt.r for pt in self.points])

    def statistics(self) -> np.ndarray:
        return np.array([pt.statistic for pt in self.points])

    @property
    def any_clamped(self) -> bool:
        return any(pt.clamped for pt in self.points)

    def contains_mle(self) -> bool:
        """Winding-number test of the MLE against the 2-d boundary polygon."""
        if self.dof != 2:
            raise ValueError("polygon containment is defined for 2-d regions only")
        return geometry.contains(self.coordinates(), self.theta_hat)

    def __len__(self) -> int:
        return len(self.points)


def resolve_r_scale(fitted: FittedModel, opts: SolverOptions) -> float:
    if opts.r_scale is not None:
        return float(opts.r_scale)
    scales = fitted.scales()
    if scales is None or not np.all(np.isfinite(scales)) or np.any(scales <= 0):
        return 1.0
    return float(np.exp(np.log(scales).mean()))


def solve_ray(fitted: FittedModel, frame: RadialFrame, threshold: float,
              opts: SolverOptions | None = None, r_scale: float | None = None) -> BoundaryPoint:
    """Smallest radius along ``frame`` where the statistic reaches ``threshold``.

    Raises:
        NonFiniteStatistic: the statistic is NaN or infinite inside the box.
        UnboundedRay: ``scan_cap`` steps passed without a crossing or a box face.
    """
    opts = opts or SolverOptions()
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if r_scale is None:
        r_scale = resolve_r_scale(fitted, opts)
    angles = frame.direction.angles
    r_max = max_radius_in_box(fitted, frame)
    step = opts.scan_step * r_scale

    def stat(r: float) -> float:
        t = radial_lr_statistic(fitted, frame, r)
        if not math.isfinite(t):
            raise NonFiniteStatistic(to_cartesian(frame, r), angles)
        return t

    r_lo = 0.0
    r_hi = t_hi = None
    for k in range(1, opts.scan_cap + 1):
        r = k * step
        at_face = r >= r_max
        if at_face:
            r = r_max
        t = stat(r)
        if t >= threshold:
            r_hi, t_hi = r, t
            break
        if at_face:
            return BoundaryPoint(to_cartesian(frame, r_max), r_max, frame.direction, t, True)
        r_lo = r
    else:
        raise UnboundedRay(
            f"no crossing within {opts.scan_cap} scan steps of size {step:g} "
            f"and no box face along the ray",
            angles,
        )

    if t_hi == threshold:
        return BoundaryPoint(to_cartesian(frame, r_hi), r_hi, frame.direction, t_hi, False)

    xtol = opts.r_tolerance * r_scale
    lo, hi = r_lo, r_hi
    for _ in range(4):
        root = brentq(lambda r: stat(r) - threshold, lo, hi, xtol=xtol)
        t_root = stat(root)
        if abs(t_root - threshold) <= opts.stat_tolerance:
            return BoundaryPoint(to_cartesian(frame, root), root, frame.direction, t_root, False)
        # Steep statistic: shrink the bracket around the estimate and retry.
        if t_root < threshold:
            lo = root
        else:
            hi = root
        xtol *= 1e-3
    raise SolverError(
        f"statistic at the refined root misses the threshold by {abs(t_root - threshold):g}",
        angles,
    )


def polar_directions(n_angles: int) -> list[Polar]:
    return [Polar(2.0 * math.pi * j / n_angles) for j in range(n_angles)]


def lattice_directions(n_phi: int, n_tau: int, kind: str = "latlong") -> list[Spherical]:
    """Ray directions for 3-d regions.

    ``latlong`` gives ``n_tau`` rings (tau offset by half a step so the poles
    are not repeated) of ``n_phi`` equally spaced azimuths, ordered by tau
    then phi.  ``fibonacci`` spreads ``n_phi * n_tau`` directions on a
    golden-angle spiral, ordered by tau.
    """
    if n_phi < 1 or n_tau < 1:
        raise ValueError("n_phi and n_tau must be positive")
    if kind == "latlong":
        return [
            Spherical(2.0 * math.pi * i / n_phi, math.pi * (k + 0.5) / n_tau)
            for k in range(n_tau)
            for i in range(n_phi)
        ]
    if kind == "fibonacci":
        total = n_phi * n_tau
        out = []
        for k in range(total):
            z = 1.0 - (2.0 * k + 1.0) / total
            out.append(Spherical((k * GOLDEN_ANGLE) % (2.0 * math.pi), math.acos(z)))
        return out
    raise ValueError(f"unknown lattice {kind!r}")


def solve_region(fitted: FittedModel, alpha: float, directions: Sequence[Direction],
                 opts: SolverOptions | None = None) -> ConfidenceRegion:
    """Solve every ray in ``directions``; output order follows ``directions``."""
    opts = opts or SolverOptions()
    threshold = chi_squared_quantile(alpha, fitted.p).value
    r_scale = resolve_r_scale(fitted, opts)
    start_count = fitted.n_evaluations
    t0 = time.perf_counter()

    def one(direction):
        try:
            return solve_ray(fitted, frame_for(fitted, direction), threshold, opts, r_scale)
        except SolverError as exc:
            if exc.direction is None:
                exc.direction = direction.angles
            raise

    if opts.workers > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            points = list(pool.map(one, directions))
    else:
        points = [one(d) for d in directions]
    return ConfidenceRegion(
        points=points,
        alpha=float(alpha),
        dof=fitted.p,
        threshold=threshold,
        n_evaluations=fitted.n_evaluations - start_count,
        wall_time=time.perf_counter() - t0,
        theta_hat=np.array(fitted.theta_hat),
        parameter_names=fitted.model.parameter_names,
    )


def region_2d(fitted: FittedModel, alpha: float = 0.10, n_angles: int = DEFAULT_ANGLES,
              opts: SolverOptions | None = None) -> ConfidenceRegion:
    """Boundary of a 2-d region from ``n_angles`` equally spaced rays on [0, 2 pi)."""
    if fitted.p != 2:
        raise ValueError(f"region_2d needs 2 parameters of interest, model has {fitted.p}")
    if n_angles < 1:
        raise ValueError("n_angles must be positive")
    return solve_region(fitted, alpha, polar_directions(n_angles), opts)


def region_3d(fitted: FittedModel, alpha: float = 0.10, n_phi: int = DEFAULT_PHI,
              n_tau: int = DEFAULT_TAU, opts: SolverOptions | None = None) -> ConfidenceRegion:
    """Boundary of a 3-d region on an (azimuth, inclination) lattice of rays."""
    if fitted.p != 3:
        raise ValueError(f"region_3d needs 3 parameters of interest, model has {fitted.p}")
    opts = opts or SolverOptions()
    return solve_region(fitted, alpha, lattice_directions(n_phi, n_tau, opts.lattice), opts)
