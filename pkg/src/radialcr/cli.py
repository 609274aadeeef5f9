"""Command-line front end.

Examples::

    radialcr --model bvnorm --seed 2 --out-csv boundary.csv --out-svg region.svg
    radialcr --model bvnorm --data obs.csv --method grid --grid-lower -3 -3 \\
        --grid-upper 3 3 --grid-n 121 --out-json report.json
    radialcr --benchmark --replicates 100 --out-json bench.json

Exit codes: 2 configuration error, 3 data error, 4 fit failure, 5 solver failure.
"""

from __future__ import annotations

import argparse
import importlib.util
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import export
from .boundary import SolverOptions, region_2d, region_3d
from .exceptions import ConvergenceFailure, DegenerateData, OutOfBox, SolverError
from .grid import GridSpec, boundary_hausdorff, evaluate_grid, marching_squares, region_captured
from .likelihood import Dataset, FittedModel, LikelihoodModel, ProfileMode, fit
from .models import MODELS, BENCH_RHO, BENCH_VARIANCE, benchmark_data, regression_data
from .special import chi_squared_quantile

log = logging.getLogger("radialcr")

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_FIT = 4
EXIT_SOLVER = 5


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    model: str = "bvnorm"
    data: str | None = None
    mapping: dict[str, str] = field(default_factory=dict)
    alpha: float = 0.10
    method: str = "radial"
    n_angles: int = 180
    n_phi: int = 72
    n_tau: int = 36
    grid_lower: tuple[float, float] | None = None
    grid_upper: tuple[float, float] | None = None
    grid_n: int | None = None
    out_csv: str | None = None
    out_json: str | None = None
    out_svg: str | None = None
    out_grid: str | None = None
    seed: int = 2
    profile_mode: ProfileMode = ProfileMode.PLUG_IN
    solver: SolverOptions = field(default_factory=SolverOptions)
    benchmark: bool = False
    replicates: int = 100

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"--alpha must lie in (0, 1), got {self.alpha}")
        if self.method not in ("radial", "grid"):
            raise ConfigError(f"unknown method {self.method!r}")
        if min(self.n_angles, self.n_phi, self.n_tau) < 1:
            raise ConfigError("angle counts must be positive")
        grid_given = [v is not None for v in (self.grid_lower, self.grid_upper, self.grid_n)]
        if self.method == "grid" and not all(grid_given):
            raise ConfigError("--method grid needs --grid-lower, --grid-upper and --grid-n")
        if self.method == "radial" and not self.benchmark and any(grid_given):
            raise ConfigError("grid options are only valid with --method grid or --benchmark")
        if self.replicates < 0:
            raise ConfigError("--replicates must be nonnegative")

    def grid_spec(self) -> GridSpec:
        try:
            return GridSpec(self.grid_lower, self.grid_upper, self.grid_n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


# -- model and data resolution -------------------------------------------------


def load_model(spec: str) -> LikelihoodModel:
    """A registry name, or a path to a Python file defining ``MODEL`` or ``build_model()``."""
    if spec in MODELS:
        return MODELS[spec]()
    path = Path(spec)
    if path.suffix != ".py" or not path.is_file():
        raise ConfigError(f"unknown model {spec!r}: not one of {sorted(MODELS)} nor a .py file")
    module_spec = importlib.util.spec_from_file_location(f"radialcr_user_{path.stem}", path)
    module = importlib.util.module_from_spec(module_spec)
    try:
        module_spec.loader.exec_module(module)
    except Exception as exc:
        raise ConfigError(f"failed to import model file {path}: {exc}") from exc
    if hasattr(module, "build_model"):
        model = module.build_model()
    elif hasattr(module, "MODEL"):
        model = module.MODEL
    else:
        raise ConfigError(f"{path} defines neither MODEL nor build_model()")
    if not isinstance(model, LikelihoodModel):
        raise ConfigError(f"{path} did not provide a LikelihoodModel")
    return model


def synthetic_data(model: LikelihoodModel, seed: int, scale: float = 1.0) -> Dataset:
    """Seeded stand-in data when no ``--data`` file is given."""
    if model.name == "bvnorm":
        return benchmark_data(seed, scale=scale)
    if model.name == "tvnorm":
        cov = BENCH_VARIANCE * (np.full((3, 3), BENCH_RHO) + (1 - BENCH_RHO) * np.eye(3))
        xyz = np.random.default_rng(seed).multivariate_normal(np.zeros(3), cov, size=10) * scale
        return Dataset({"x": xyz[:, 0], "y": xyz[:, 1], "z": xyz[:, 2]})
    if model.name == "linreg":
        data = regression_data(n=10, seed=seed)
        return Dataset({"x": data["x"], "y": data["y"] * scale})
    raise ConfigError(f"model {model.name!r} has no synthetic generator; pass --data")


def load_data(config: RunConfig, model: LikelihoodModel) -> Dataset:
    if config.data is None:
        return synthetic_data(model, config.seed)
    return export.read_dataset(config.data, model.variable_names, config.mapping)


# -- commands ------------------------------------------------------------------------


def _region(fitted: FittedModel, config: RunConfig):
    if fitted.p == 2:
        return region_2d(fitted, config.alpha, config.n_angles, config.solver)
    return region_3d(fitted, config.alpha, config.n_phi, config.n_tau, config.solver)


def run_region(config: RunConfig) -> dict:
    """Fit, compute the region by the configured method and write the artifacts.

    Returns the JSON report.
    """
    model = load_model(config.model)
    data = load_data(config, model)
    fitted = fit(model, data, config.profile_mode)
    names = model.parameter_names
    report = {
        "method": config.method,
        "alpha": config.alpha,
        "dof": fitted.p,
        "threshold": chi_squared_quantile(config.alpha, fitted.p).value,
        **export.fit_summary(fitted),
    }

    if config.method == "radial":
        region = _region(fitted, config)
        report.update(
            n_points=len(region),
            n_clamped=sum(pt.clamped for pt in region.points),
            n_evaluations=region.n_evaluations,
            wall_time=region.wall_time,
        )
        if config.out_csv:
            export.write_boundary_csv(config.out_csv, region)
        if config.out_svg:
            export.write_region_svg(config.out_svg, region)
        result = region
    else:
        if fitted.p != 2:
            raise ConfigError("the grid method supports 2-d regions only")
        spec = config.grid_spec()
        try:
            grid = evaluate_grid(fitted, spec, workers=config.solver.workers)
        except OutOfBox as exc:
            raise ConfigError(str(exc)) from None
        t0 = time.perf_counter()
        contour = marching_squares(grid.values, spec, report["threshold"])
        extract_time = time.perf_counter() - t0
        report.update(
            grid={"lower": list(spec.lower), "upper": list(spec.upper),
                  "n_per_axis": spec.n_per_axis},
            n_evaluations=grid.n_evaluations,
            captured=region_captured(grid.values, report["threshold"]),
            n_loops=len(contour.closed_loops),
            n_open_chains=len(contour.open_chains),
            wall_time=grid.eval_time + extract_time,
            eval_time=grid.eval_time,
            extract_time=extract_time,
        )
        if config.out_csv:
            export.write_contour_csv(config.out_csv, contour, names, report["threshold"])
        if config.out_svg and not contour.empty:
            export.write_contour_svg(config.out_svg, contour, fitted.theta_hat, names, config.alpha)
        if config.out_grid:
            export.write_grid_csv(config.out_grid, grid, names)
        result = contour

    if config.out_json:
        export.write_json(config.out_json, report)
    report["_result"] = result
    return report


def _experiment(fitted: FittedModel, spec: GridSpec, config: RunConfig) -> tuple[dict, object]:
    region = region_2d(fitted, config.alpha, config.n_angles, config.solver)
    grid = evaluate_grid(fitted, spec, workers=config.solver.workers)
    t0 = time.perf_counter()
    contour = marching_squares(grid.values, spec, region.threshold)
    extract_time = time.perf_counter() - t0
    entry = {
        "grid": {"lower": list(spec.lower), "upper": list(spec.upper),
                 "n_per_axis": spec.n_per_axis},
        "radial_evaluations": region.n_evaluations,
        "grid_evaluations": grid.n_evaluations,
        "evaluation_ratio": grid.n_evaluations / region.n_evaluations,
        "radial_time": region.wall_time,
        "grid_eval_time": grid.eval_time,
        "grid_extract_time": extract_time,
        "captured": region_captured(grid.values, region.threshold),
        "hausdorff": boundary_hausdorff(region.coordinates(), contour),
        "grid_spacing": max(spec.spacing),
        "n_clamped": sum(pt.clamped for pt in region.points),
    }
    return entry, region


def run_benchmark(config: RunConfig) -> dict:
    """Radial-versus-grid comparison on the original and x10-scaled data.

    The second experiment widens the grid by the same factor with the same
    spacing.  Optionally runs ``config.replicates`` independent x10-scale
    datasets through the radial method.
    """
    model = load_model(config.model)
    if model.interest_dim != 2:
        raise ConfigError("the benchmark compares 2-d regions only")
    data = load_data(config, model)
    if config.grid_lower is not None:
        spec = config.grid_spec()
    else:
        spec = GridSpec((-3.0, -3.0), (3.0, 3.0), 121)
    factor = 10.0
    wide = GridSpec(
        tuple(factor * v for v in spec.lower), tuple(factor * v for v in spec.upper),
        int(round((spec.n_per_axis - 1) * factor)) + 1,
    )

    fitted = fit(model, data, config.profile_mode)
    first, region1 = _experiment(fitted, spec, config)
    scaled = fit(model, data.transformed(lambda v: factor * v), config.profile_mode)
    second, region2 = _experiment(scaled, wide, config)
    second["radius_scale_error"] = float(
        np.abs(region2.radii() - factor * region1.radii()).max()
    )
    second["radial_evaluation_change"] = (
        region2.n_evaluations / region1.n_evaluations - 1.0
    )
    report = {
        "alpha": config.alpha,
        "threshold": region1.threshold,
        "n_angles": config.n_angles,
        **export.fit_summary(fitted),
        "experiments": [first, second],
    }

    if config.replicates:
        total_evals = failures = 0
        t0 = time.perf_counter()
        for k in range(config.replicates):
            rep_data = synthetic_data(model, config.seed + 1 + k, scale=factor)
            try:
                rep = fit(model, rep_data, config.profile_mode)
                total_evals += region_2d(rep, config.alpha, config.n_angles,
                                         config.solver).n_evaluations
            except (DegenerateData, ConvergenceFailure, SolverError) as exc:
                failures += 1
                log.warning("replicate %d failed: %s", k, exc)
        report["replication"] = {
            "replicates": config.replicates,
            "failures": failures,
            "total_evaluations": total_evals,
            "total_time": time.perf_counter() - t0,
        }
    if config.out_json:
        export.write_json(config.out_json, report)
    return report


# -- argument parsing --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radialcr",
        description="Likelihood-ratio confidence region boundaries by radial root finding.",
    )
    parser.add_argument("--model", default="bvnorm",
                        help=f"registry name ({', '.join(sorted(MODELS))}) or path to a .py file")
    parser.add_argument("--data", help="headered CSV; omitted means seeded synthetic data")
    parser.add_argument("--map", dest="mapping", help="variable=column pairs, comma separated")
    parser.add_argument("--alpha", type=float, default=0.10)
    parser.add_argument("--method", choices=("radial", "grid"), default="radial")
    parser.add_argument("--angles", type=int, default=180, help="rays for 2-d regions")
    parser.add_argument("--phi", type=int, default=72, help="azimuths for 3-d regions")
    parser.add_argument("--tau", type=int, default=36, help="inclinations for 3-d regions")
    parser.add_argument("--lattice", choices=("latlong", "fibonacci"), default="latlong")
    parser.add_argument("--grid-lower", type=float, nargs=2, metavar=("X", "Y"))
    parser.add_argument("--grid-upper", type=float, nargs=2, metavar=("X", "Y"))
    parser.add_argument("--grid-n", type=int, help="grid points per axis")
    parser.add_argument("--out-csv")
    parser.add_argument("--out-json")
    parser.add_argument("--out-svg")
    parser.add_argument("--out-grid", help="grid values as CSV (grid method only)")
    parser.add_argument("--seed", type=int, default=2, help="seed for synthetic data")
    parser.add_argument("--profile", choices=("plugin", "full"), default="plugin")
    parser.add_argument("--scan-step", type=float, default=0.1)
    parser.add_argument("--r-tol", type=float, default=1e-9)
    parser.add_argument("--stat-tol", type=float, default=1e-6)
    parser.add_argument("--scan-cap", type=int, default=10_000)
    parser.add_argument("--r-scale", type=float)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--benchmark", action="store_true",
                        help="compare radial and grid methods on original and x10 data")
    parser.add_argument("--replicates", type=int, default=100,
                        help="benchmark replicates at x10 scale (0 to skip)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    try:
        solver = SolverOptions(
            scan_step=args.scan_step, r_tolerance=args.r_tol, stat_tolerance=args.stat_tol,
            scan_cap=args.scan_cap, r_scale=args.r_scale, lattice=args.lattice,
            workers=args.workers,
        )
        mapping = export.parse_mapping(args.mapping)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    config = RunConfig(
        model=args.model, data=args.data, mapping=mapping, alpha=args.alpha,
        method=args.method, n_angles=args.angles, n_phi=args.phi, n_tau=args.tau,
        grid_lower=tuple(args.grid_lower) if args.grid_lower else None,
        grid_upper=tuple(args.grid_upper) if args.grid_upper else None,
        grid_n=args.grid_n, out_csv=args.out_csv, out_json=args.out_json,
        out_svg=args.out_svg, out_grid=args.out_grid, seed=args.seed,
        profile_mode=ProfileMode(args.profile), solver=solver,
        benchmark=args.benchmark, replicates=args.replicates,
    )
    config.validate()
    return config


def _print_region(report: dict) -> None:
    print(f"model: {report['model']}  n={report['n']}  method={report['method']}")
    print(f"alpha: {report['alpha']}  dof: {report['dof']}  threshold: {report['threshold']:.6f}")
    print("mle: " + ", ".join(f"{k}={v:.6g}" for k, v in report["mle"].items()))
    print(f"evaluations: {report['n_evaluations']}  time: {report['wall_time']:.3f}s")


def _print_benchmark(report: dict) -> None:
    print(f"threshold: {report['threshold']:.6f}")
    for k, e in enumerate(report["experiments"], start=1):
        print(
            f"experiment {k}: grid {e['grid']['n_per_axis']}^2 -> {e['grid_evaluations']} evals "
            f"({e['grid_eval_time'] + e['grid_extract_time']:.3f}s); radial "
            f"{e['radial_evaluations']} evals ({e['radial_time']:.3f}s); "
            f"ratio {e['evaluation_ratio']:.1f}; hausdorff {e['hausdorff']:.4g}"
        )
    rep = report.get("replication")
    if rep:
        print(f"replication: {rep['replicates']} datasets, {rep['failures']} failures, "
              f"{rep['total_evaluations']} evals, {rep['total_time']:.2f}s")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        config = config_from_args(args)
        if config.benchmark:
            _print_benchmark(run_benchmark(config))
        else:
            _print_region(run_region(config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateData, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceFailure as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (SolverError, OutOfBox) as exc:
        where = f" (direction {exc.direction})" if getattr(exc, "direction", None) else ""
        print(f"solver failure: {exc}{where}", file=sys.stderr)
        return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
