"""Grid evaluation of the statistic and marching-squares level-set extraction.

This is the brute-force baseline the radial method is compared with: evaluate
the statistic on a rectangular lattice, then trace the threshold contour.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .exceptions import OutOfBox
from .likelihood import FittedModel, lr_statistic_many

SNAP_TOLERANCE = 1e-9

# Edges of a cell: 0 bottom, 1 right, 2 top, 3 left.
# Corner bits: 1 bottom-left, 2 bottom-right, 4 top-right, 8 top-left,
# set where the value is at or above the level.
_SEGMENTS: dict[int, tuple[tuple[int, int], ...]] = {
    0: (),
    1: ((3, 0),),
    2: ((0, 1),),
    3: ((3, 1),),
    4: ((1, 2),),
    6: ((0, 2),),
    7: ((3, 2),),
    8: ((2, 3),),
    9: ((0, 2),),
    11: ((1, 2),),
    12: ((3, 1),),
    13: ((0, 1),),
    14: ((3, 0),),
    15: (),
}
# Saddles, keyed by (case, centre at or above level).
_SADDLES = {
    (5, True): ((0, 1), (3, 2)),
    (5, False): ((3, 0), (1, 2)),
    (10, True): ((3, 0), (1, 2)),
    (10, False): ((0, 1), (3, 2)),
}


@dataclass(frozen=True)
class GridSpec:
    lower: tuple[float, float]
    upper: tuple[float, float]
    n_per_axis: int

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != 2 or len(upper) != 2:
            raise ValueError("grid bounds must be 2-d")
        if not all(lo < hi for lo, hi in zip(lower, upper)):
            raise ValueError("grid needs lower < upper on both axes")
        if self.n_per_axis < 2:
            raise ValueError("n_per_axis must be at least 2")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def total(self) -> int:
        return self.n_per_axis**2

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        xs = np.linspace(self.lower[0], self.upper[0], self.n_per_axis)
        ys = np.linspace(self.lower[1], self.upper[1], self.n_per_axis)
        return xs, ys

    @property
    def spacing(self) -> tuple[float, float]:
        return tuple((hi - lo) / (self.n_per_axis - 1) for lo, hi in zip(self.lower, self.upper))

    def scaled(self, factor: float) -> "GridSpec":
        return GridSpec(
            tuple(factor * v for v in self.lower), tuple(factor * v for v in self.upper),
            self.n_per_axis,
        )


@dataclass
class ContourPolyline:
    """Level-set segments plus their assembly into polylines.

    ``closed_loops`` repeat their first vertex at the end; ``open_chains``
    start and end on the grid border.
    """

    segments: np.ndarray
    closed_loops: list[np.ndarray] = field(default_factory=list)
    open_chains: list[np.ndarray] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return len(self.segments) == 0

    def polylines(self) -> list[np.ndarray]:
        return self.closed_loops + self.open_chains

    def vertices(self) -> np.ndarray:
        if self.empty:
            return np.zeros((0, 2))
        return np.vstack(self.polylines())


@dataclass
class GridResult:
    spec: GridSpec
    values: np.ndarray
    n_evaluations: int
    eval_time: float


def evaluate_grid(fitted: FittedModel, spec: GridSpec, workers: int = 1) -> GridResult:
    """Statistic on every lattice point.

    ``values[i, j]`` is the statistic at ``(xs[j], ys[i])``: rows follow the
    second parameter, columns the first.

    Raises:
        OutOfBox: if the grid extends past the parameter box.
    """
    if fitted.p != 2:
        raise ValueError("grid evaluation is 2-d only")
    lower, upper = fitted.model.parameter_box
    if np.any(np.asarray(spec.lower) < lower) or np.any(np.asarray(spec.upper) > upper):
        raise OutOfBox(f"grid {spec.lower}..{spec.upper} exceeds the parameter box")
    xs, ys = spec.axes()
    start = fitted.n_evaluations
    t0 = time.perf_counter()

    def row(y):
        return lr_statistic_many(fitted, np.column_stack([xs, np.full_like(xs, y)]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = np.vstack(list(pool.map(row, ys)))
    else:
        values = np.vstack([row(y) for y in ys])
    return GridResult(spec, values, fitted.n_evaluations - start, time.perf_counter() - t0)


def _edge_point(edge: int, i: int, j: int, grid: np.ndarray, xs, ys, level: float):
    # Always interpolate left-to-right / bottom-to-top so neighbouring cells
    # produce bit-identical points on a shared edge.
    if edge in (0, 2):
        r = i if edge == 0 else i + 1
        a, b = grid[r, j], grid[r, j + 1]
        t = (level - a) / (b - a)
        return (xs[j] + t * (xs[j + 1] - xs[j]), ys[r])
    c = j + 1 if edge == 1 else j
    a, b = grid[i, c], grid[i + 1, c]
    t = (level - a) / (b - a)
    return (xs[c], ys[i] + t * (ys[i + 1] - ys[i]))


def _assemble(segments: list[tuple[tuple[float, float], tuple[float, float]]]):
    def key(pt):
        return (round(pt[0] / SNAP_TOLERANCE), round(pt[1] / SNAP_TOLERANCE))

    ends: dict[tuple[int, int], list[int]] = {}
    for k, (a, b) in enumerate(segments):
        ends.setdefault(key(a), []).append(k)
        ends.setdefault(key(b), []).append(k)
    used = np.zeros(len(segments), dtype=bool)

    def walk(k, start_pt):
        chain = [start_pt]
        pt = start_pt
        while True:
            used[k] = True
            a, b = segments[k]
            pt = b if key(a) == key(pt) else a
            chain.append(pt)
            nxt = [m for m in ends[key(pt)] if not used[m]]
            if not nxt:
                return chain
            k = nxt[0]

    loops, chains = [], []
    # Chains first: they start at endpoints with a single incident segment.
    for pk, segs in ends.items():
        if len(segs) == 1 and not used[segs[0]]:
            a, b = segments[segs[0]]
            start = a if key(a) == pk else b
            chains.append(np.array(walk(segs[0], start)))
    for k in range(len(segments)):
        if not used[k]:
            chain = walk(k, segments[k][0])
            loops.append(np.array(chain))
    return loops, chains


def marching_squares(grid: np.ndarray, spec: GridSpec, level: float) -> ContourPolyline:
    """Contour of ``grid`` at ``level`` by marching squares.

    Cell edges are cut by linear interpolation.  The two saddle cases are
    resolved by comparing the mean of the four corners with the level.
    A level outside the grid's range gives an empty contour.
    """
    grid = np.asarray(grid, dtype=float)
    xs, ys = spec.axes()
    if grid.shape != (len(ys), len(xs)):
        raise ValueError(f"grid shape {grid.shape} does not match the grid axes")
    if not grid.min() < level < grid.max():
        return ContourPolyline(np.zeros((0, 2, 2)))

    above = grid >= level
    case = (
        above[:-1, :-1] * 1 + above[:-1, 1:] * 2 + above[1:, 1:] * 4 + above[1:, :-1] * 8
    )
    segments = []
    for i, j in zip(*np.nonzero((case != 0) & (case != 15))):
        c = int(case[i, j])
        if c in (5, 10):
            centre = 0.25 * (grid[i, j] + grid[i, j + 1] + grid[i + 1, j] + grid[i + 1, j + 1])
            pairs = _SADDLES[(c, bool(centre >= level))]
        else:
            pairs = _SEGMENTS[c]
        for e1, e2 in pairs:
            a = _edge_point(e1, i, j, grid, xs, ys, level)
            b = _edge_point(e2, i, j, grid, xs, ys, level)
            # Grid nodes lying exactly on the level yield zero-length pieces.
            if abs(a[0] - b[0]) > SNAP_TOLERANCE or abs(a[1] - b[1]) > SNAP_TOLERANCE:
                segments.append((a, b))
    loops, chains = _assemble(segments)
    return ContourPolyline(np.array(segments, dtype=float).reshape(-1, 2, 2), loops, chains)


def region_captured(grid: np.ndarray, level: float) -> bool:
    """True when the whole grid border lies at or above ``level``.

    Otherwise the level set reaches the border and the region may extend
    past the grid.
    """
    border = np.concatenate([grid[0], grid[-1], grid[:, 0], grid[:, -1]])
    return bool(border.min() >= level)


def interpolate_bilinear(grid: np.ndarray, spec: GridSpec, point) -> float:
    """Bilinear interpolant of ``grid`` at ``point``; exact on cell edges."""
    xs, ys = spec.axes()
    x, y = point
    j = int(np.clip(np.searchsorted(xs, x) - 1, 0, len(xs) - 2))
    i = int(np.clip(np.searchsorted(ys, y) - 1, 0, len(ys) - 2))
    tx = (x - xs[j]) / (xs[j + 1] - xs[j])
    ty = (y - ys[i]) / (ys[i + 1] - ys[i])
    bottom = grid[i, j] * (1 - tx) + grid[i, j + 1] * tx
    top = grid[i + 1, j] * (1 - tx) + grid[i + 1, j + 1] * tx
    return float(bottom * (1 - ty) + top * ty)


def boundary_hausdorff(region_coordinates: np.ndarray, contour: ContourPolyline) -> float:
    """Hausdorff distance between a closed radial boundary polygon and a contour."""
    if contour.empty:
        return float("inf")
    return geometry.hausdorff_distance(
        region_coordinates, contour.polylines(), closed_a=True, closed_b=False
    )
