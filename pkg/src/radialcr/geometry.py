"""Polygon and polyline helpers for comparing boundaries."""

from __future__ import annotations

import numpy as np


def winding_number(point, polygon) -> int:
    """Winding number of the closed ``polygon`` (k, 2) around ``point``."""
    px, py = point
    pts = np.asarray(polygon, dtype=float)
    x0, y0 = pts[:, 0] - px, pts[:, 1] - py
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    cross = x0 * y1 - x1 * y0
    upward = (y0 <= 0) & (y1 > 0) & (cross > 0)
    downward = (y0 > 0) & (y1 <= 0) & (cross < 0)
    return int(upward.sum() - downward.sum())


def contains(polygon, point) -> bool:
    return winding_number(point, polygon) != 0


def _closed_segments(poly: np.ndarray, closed: bool) -> tuple[np.ndarray, np.ndarray]:
    if closed:
        return poly, np.roll(poly, -1, axis=0)
    return poly[:-1], poly[1:]


def point_to_polyline_distance(points, polyline, closed: bool = True,
                               chunk: int = 256) -> np.ndarray:
    """Distance from each of ``points`` (m, 2) to the nearest segment of ``polyline``."""
    pts = np.asarray(points, dtype=float)
    a, b = _closed_segments(np.asarray(polyline, dtype=float), closed)
    ab = b - a
    length2 = (ab**2).sum(axis=1)
    length2 = np.where(length2 == 0.0, 1.0, length2)
    out = np.empty(len(pts))
    for start in range(0, len(pts), chunk):
        block = pts[start:start + chunk]
        ap = block[:, None, :] - a[None, :, :]
        t = np.clip((ap * ab[None]).sum(axis=2) / length2[None], 0.0, 1.0)
        gap = ap - t[..., None] * ab[None]
        out[start:start + chunk] = np.sqrt((gap**2).sum(axis=2)).min(axis=1)
    return out


def densify(polyline, max_spacing: float, closed: bool = True) -> np.ndarray:
    """Insert points so consecutive vertices are at most ``max_spacing`` apart."""
    a, b = _closed_segments(np.asarray(polyline, dtype=float), closed)
    out = []
    for p, q in zip(a, b):
        k = max(1, int(np.ceil(np.linalg.norm(q - p) / max_spacing)))
        t = np.arange(k)[:, None] / k
        out.append(p + t * (q - p))
    if not closed:
        out.append(np.asarray(polyline, dtype=float)[-1:])
    return np.vstack(out)


def _curve_list(curves):
    # Accept a single (k, 2) polyline or a list of polylines.
    if isinstance(curves, np.ndarray) and curves.ndim == 2:
        return [curves]
    return [np.asarray(c, dtype=float) for c in curves]


def _mean_edge(curves) -> float:
    edges = np.concatenate([np.linalg.norm(np.diff(c, axis=0), axis=1) for c in curves])
    return float(edges.mean())


def _directed(src, dst, closed_src, closed_dst, resolution) -> float:
    worst = 0.0
    for c in src:
        pts = densify(c, resolution, closed_src)
        dist = np.min(
            [point_to_polyline_distance(pts, d, closed_dst) for d in dst], axis=0
        )
        worst = max(worst, float(dist.max()))
    return worst


def hausdorff_distance(curve_a, curve_b, closed_a: bool = True, closed_b: bool = True,
                       resolution: float | None = None) -> float:
    """Symmetric Hausdorff distance between two polylines (or lists of them).

    Each curve is sampled at ``resolution`` spacing (default: 1/5 of the
    finer curve's mean edge) and measured against the other's segments.
    """
    a = _curve_list(curve_a)
    b = _curve_list(curve_b)
    if resolution is None:
        resolution = min(_mean_edge(a), _mean_edge(b)) / 5.0
    return max(
        _directed(a, b, closed_a, closed_b, resolution),
        _directed(b, a, closed_b, closed_a, resolution),
    )
