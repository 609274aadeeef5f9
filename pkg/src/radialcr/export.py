"""CSV ingestion, boundary/report export and flat SVG plots."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .boundary import ConfidenceRegion
from .exceptions import DegenerateData
from .grid import ContourPolyline, GridResult
from .likelihood import Dataset, FittedModel

REPORT_SCHEMA = 1


def _fmt(x: float) -> str:
    return repr(float(x))


# -- input -----------------------------------------------------------------------


def parse_mapping(text: str | None) -> dict[str, str]:
    """Parse ``var=column,var=column`` into a dict."""
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        var, sep, col = item.partition("=")
        if not sep or not var.strip() or not col.strip():
            raise ValueError(f"bad mapping entry {item!r}; expected var=column")
        out[var.strip()] = col.strip()
    return out


def read_dataset(path: str | Path, variables: Sequence[str],
                 mapping: Mapping[str, str] | None = None) -> Dataset:
    """Load the model's variables from a headered, comma-separated UTF-8 file.

    Each variable is read from the column of the same name unless
    ``mapping`` redirects it.

    Raises:
        DegenerateData: on missing columns, unparsable or non-finite values.
        OSError: if the file cannot be read.
    """
    mapping = dict(mapping or {})
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DegenerateData(f"{path}: empty file or missing header")
        header = [h.strip() for h in reader.fieldnames]
        reader.fieldnames = header
        wanted = {v: mapping.get(v, v) for v in variables}
        missing = [c for c in wanted.values() if c not in header]
        if missing:
            raise DegenerateData(f"{path}: missing columns {missing}; header is {header}")
        columns: dict[str, list[float]] = {v: [] for v in variables}
        for lineno, row in enumerate(reader, start=2):
            for var, col in wanted.items():
                raw = (row.get(col) or "").strip()
                try:
                    value = float(raw)
                except ValueError:
                    raise DegenerateData(f"{path}:{lineno}: column {col!r} value {raw!r} "
                                         "is not a number") from None
                if not math.isfinite(value):
                    raise DegenerateData(f"{path}:{lineno}: column {col!r} is not finite")
                columns[var].append(value)
    return Dataset(columns)


def write_dataset(path: str | Path, data: Dataset) -> None:
    names = data.names()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in data.matrix(names):
            writer.writerow([_fmt(v) for v in row])


# -- boundary tables ----------------------------------------------------------------


def boundary_header(region: ConfidenceRegion) -> list[str]:
    angles = ["phi"] if region.dof == 2 else ["phi", "tau"]
    return ["index", *angles, "r", *region.parameter_names, "statistic", "clamped"]


def write_boundary_csv(path: str | Path, region: ConfidenceRegion) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(boundary_header(region))
        for k, pt in enumerate(region.points):
            writer.writerow(
                [k, *(_fmt(a) for a in pt.direction.angles), _fmt(pt.r),
                 *(_fmt(v) for v in pt.theta), _fmt(pt.statistic), str(pt.clamped).lower()]
            )


def read_boundary_csv(path: str | Path) -> list[dict]:
    """Rows of a boundary CSV with numeric fields converted."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, value in row.items():
                if key == "clamped":
                    parsed[key] = value == "true"
                elif key in ("index", "loop"):
                    parsed[key] = int(value)
                else:
                    parsed[key] = float(value)
            rows.append(parsed)
    return rows


def write_contour_csv(path: str | Path, contour: ContourPolyline, names: Sequence[str],
                      level: float) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "loop", *names, "statistic"])
        k = 0
        for loop_id, poly in enumerate(contour.polylines()):
            for vertex in poly:
                writer.writerow([k, loop_id, *(_fmt(v) for v in vertex), _fmt(level)])
                k += 1


def write_grid_csv(path: str | Path, result: GridResult, names: Sequence[str]) -> None:
    """Grid values as long-format ``(x, y, statistic)`` rows."""
    xs, ys = result.spec.axes()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*names, "statistic"])
        for i, y in enumerate(ys):
            for j, x in enumerate(xs):
                writer.writerow([_fmt(x), _fmt(y), _fmt(result.values[i, j])])


# -- JSON report ---------------------------------------------------------------------------


def fit_summary(fitted: FittedModel) -> dict:
    model = fitted.model
    return {
        "model": model.name,
        "n": fitted.data.n,
        "profile_mode": fitted.profile_mode.value,
        "mle": {name: float(v) for name, v in zip(model.parameter_names, fitted.theta_hat)},
        "nuisance_mle": {name: float(v) for name, v in zip(model.nuisance_names, fitted.nu_hat)},
        "loglik_at_mle": float(fitted.loglik_at_mle),
    }


def write_json(path: str | Path, payload: Mapping) -> None:
    text = json.dumps({"schema": REPORT_SCHEMA, **payload}, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


# -- SVG ---------------------------------------------------------------------------------------

_SIZE = 480
_MARGIN = 60


class _Canvas:
    def __init__(self, points: np.ndarray):
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        pad = 0.05 * np.where(hi > lo, hi - lo, 1.0)
        self.lo, self.hi = lo - pad, hi + pad
        self.span = _SIZE - 2 * _MARGIN

    def xy(self, p) -> tuple[float, float]:
        u = (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0])
        v = (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1])
        return _MARGIN + u * self.span, _SIZE - _MARGIN - v * self.span


def _polyline(canvas: _Canvas, pts: Iterable, css: str) -> str:
    coords = " ".join(f"{x:.3f},{y:.3f}" for x, y in (canvas.xy(p) for p in pts))
    return f'<polyline class="{css}" points="{coords}" fill="none" stroke="black" stroke-width="1.5"/>'


def svg_document(outlines: Sequence[np.ndarray], mle, labels: tuple[str, str],
                 title: str = "", scatter: np.ndarray | None = None,
                 closed: Sequence[bool] | None = None) -> str:
    """Flat SVG with one polyline per outline, an MLE marker and axis labels.

    Outlines are drawn closed (first vertex repeated at the end) unless
    ``closed`` says otherwise.
    """
    closed = [True] * len(outlines) if closed is None else list(closed)
    allpts = np.vstack([*outlines, np.atleast_2d(mle)])
    canvas = _Canvas(allpts)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" '
        f'viewBox="0 0 {_SIZE} {_SIZE}">',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_SIZE - 2 * _MARGIN}" '
        f'height="{_SIZE - 2 * _MARGIN}" fill="none" stroke="#888"/>',
    ]
    if title:
        parts.append(f'<text x="{_SIZE / 2}" y="30" text-anchor="middle">{escape(title)}</text>')
    for k, (value, axis) in enumerate(
        [(canvas.lo[0], 0), (canvas.hi[0], 0), (canvas.lo[1], 1), (canvas.hi[1], 1)]
    ):
        if axis == 0:
            x = _MARGIN if k == 0 else _SIZE - _MARGIN
            parts.append(f'<text x="{x}" y="{_SIZE - _MARGIN + 16}" text-anchor="middle" '
                         f'font-size="11">{value:.4g}</text>')
        else:
            y = _SIZE - _MARGIN if k == 2 else _MARGIN
            parts.append(f'<text x="{_MARGIN - 6}" y="{y}" text-anchor="end" '
                         f'font-size="11">{value:.4g}</text>')
    parts.append(f'<text x="{_SIZE / 2}" y="{_SIZE - 20}" text-anchor="middle">'
                 f'{escape(labels[0])}</text>')
    parts.append(f'<text x="20" y="{_SIZE / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 20 {_SIZE / 2})">{escape(labels[1])}</text>')
    if scatter is not None:
        for p in scatter:
            x, y = canvas.xy(p)
            parts.append(f'<circle class="point" cx="{x:.3f}" cy="{y:.3f}" r="1" fill="#46c"/>')
    for outline, shut in zip(outlines, closed):
        pts = np.vstack([outline, outline[:1]]) if shut else outline
        parts.append(_polyline(canvas, pts, "boundary"))
    mx, my = canvas.xy(mle)
    parts.append(f'<circle class="mle" cx="{mx:.3f}" cy="{my:.3f}" r="3" fill="red"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _hull_outline(points: np.ndarray) -> np.ndarray:
    try:
        hull = ConvexHull(points)
    except QhullError:
        return points
    return points[hull.vertices]


def write_region_svg(path: str | Path, region: ConfidenceRegion) -> list[Path]:
    """Plot a region; 3-d regions give one file per coordinate pair.

    Returns the paths written.
    """
    path = Path(path)
    coords = region.coordinates()
    names = region.parameter_names
    if region.dof == 2:
        path.write_text(svg_document([coords], region.theta_hat, (names[0], names[1]),
                                     f"{100 * (1 - region.alpha):g}% confidence region"),
                        encoding="utf-8")
        return [path]
    written = []
    for a, b in ((0, 1), (0, 2), (1, 2)):
        proj = coords[:, [a, b]]
        out = path.with_name(f"{path.stem}_{names[a]}_{names[b]}{path.suffix or '.svg'}")
        out.write_text(
            svg_document([_hull_outline(proj)], region.theta_hat[[a, b]], (names[a], names[b]),
                         f"{100 * (1 - region.alpha):g}% region, projection", scatter=proj),
            encoding="utf-8",
        )
        written.append(out)
    return written


def write_contour_svg(path: str | Path, contour: ContourPolyline, mle,
                      names: Sequence[str], alpha: float) -> None:
    outlines = [loop[:-1] for loop in contour.closed_loops] + contour.open_chains
    shut = [True] * len(contour.closed_loops) + [False] * len(contour.open_chains)
    Path(path).write_text(
        svg_document(outlines, np.asarray(mle), (names[0], names[1]),
                     f"{100 * (1 - alpha):g}% confidence region (grid)", closed=shut),
        encoding="utf-8",
    )
