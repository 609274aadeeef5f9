"""Likelihood models, maximum likelihood fits and the likelihood-ratio statistic.

A :class:`LikelihoodModel` splits its parameters into ``p`` parameters of
interest (the region's axes) and ``q`` nuisance parameters.  :func:`fit`
binds a model to a :class:`Dataset` and locates the joint MLE, either through
the model's analytic estimator or a derivative-free simplex search.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .exceptions import ConvergenceFailure, DegenerateData, OutOfBox

BOX_MARGIN = 1e-12
SIMPLEX_DIAMETER = 1e-9
SIMPLEX_MAXITER = 10_000
N_RESTARTS = 3
DIVERGENCE_MAGNITUDE = 1e8

Box = tuple[np.ndarray, np.ndarray]


class ProfileMode(enum.Enum):
    PLUG_IN = "plugin"
    FULL_PROFILE = "full"


class Dataset:
    """Named, equal-length, finite data columns.

    Args:
        columns: mapping from column name to a 1-d sequence of reals.
    """

    def __init__(self, columns: Mapping[str, Sequence[float]]):
        if not columns:
            raise DegenerateData("dataset has no columns")
        cols = {}
        for name, values in columns.items():
            arr = np.asarray(values, dtype=float)
            if arr.ndim != 1:
                raise DegenerateData(f"column {name!r} is not one-dimensional")
            if not np.all(np.isfinite(arr)):
                raise DegenerateData(f"column {name!r} contains non-finite values")
            arr.setflags(write=False)
            cols[name] = arr
        lengths = {len(a) for a in cols.values()}
        if len(lengths) != 1:
            raise DegenerateData(f"columns have unequal lengths {sorted(lengths)}")
        self.n = lengths.pop()
        if self.n < 2:
            raise DegenerateData(f"need at least 2 observations, got {self.n}")
        self.columns = cols
        # Scratch space for models to memoize data summaries; never part of equality.
        self.cache: dict = {}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def names(self) -> list[str]:
        return list(self.columns)

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        """Columns stacked as an ``(n, len(names))`` array."""
        return np.column_stack([self.columns[k] for k in names])

    def transformed(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Dataset":
        return Dataset({k: fn(v) for k, v in self.columns.items()})

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, columns={self.names()})"


def _as_box(box, dim: int, what: str) -> Box:
    if box is None:
        return np.full(dim, -np.inf), np.full(dim, np.inf)
    lower, upper = (np.asarray(b, dtype=float).reshape(-1) for b in box)
    if lower.shape != (dim,) or upper.shape != (dim,):
        raise ValueError(f"{what} must have {dim} entries per side")
    if not np.all(lower < upper):
        raise ValueError(f"{what} needs lower < upper in every coordinate")
    return lower, upper


@dataclass(frozen=True, eq=False)
class LikelihoodModel:
    """A log-likelihood over interest and nuisance parameters.

    Attributes:
        name: short identifier used in reports.
        interest_dim: number of parameters of interest (2 or 3).
        nuisance_dim: number of nuisance parameters (may be 0).
        log_likelihood: ``f(interest, nuisance, data) -> float``.
        parameter_box: ``(lower, upper)`` bounds for the interest parameters;
            ``None`` means unbounded.
        nuisance_box: same, for the nuisance parameters.
        analytic_mle: optional ``data -> (interest_mle, nuisance_mle)``.
        variable_names: data columns the model reads.
        parameter_names: labels for the interest parameters.
        nuisance_names: labels for the nuisance parameters.
        initial_guess: optional ``data -> joint start vector`` for the simplex
            search; defaults to a point derived from the boxes.
        batch_log_likelihood: optional vectorized
            ``f(interests (m, p), nuisance, data) -> (m,)``; used by the grid
            evaluator.
        scale_hint: optional ``(theta_hat, nu_hat, data) -> (p,)`` per-axis
            standard-error proxies; sets the radial scan step.
        closed_form_statistic: optional ``(fitted, theta) -> float`` with the
            model's exact plug-in likelihood-ratio statistic, for validation.
        validate: optional ``(theta_hat, nu_hat, data) -> None`` that raises
            :class:`DegenerateData` on estimates the model cannot use.
    """

    name: str
    interest_dim: int
    nuisance_dim: int
    log_likelihood: Callable[[np.ndarray, np.ndarray, Dataset], float]
    parameter_box: Box | None = None
    nuisance_box: Box | None = None
    analytic_mle: Callable[[Dataset], tuple[np.ndarray, np.ndarray]] | None = None
    variable_names: tuple[str, ...] = ()
    parameter_names: tuple[str, ...] = ()
    nuisance_names: tuple[str, ...] = ()
    initial_guess: Callable[[Dataset], np.ndarray] | None = None
    batch_log_likelihood: Callable[[np.ndarray, np.ndarray, Dataset], np.ndarray] | None = None
    scale_hint: Callable[[np.ndarray, np.ndarray, Dataset], np.ndarray] | None = None
    closed_form_statistic: Callable[["FittedModel", np.ndarray], float] | None = None
    validate: Callable[[np.ndarray, np.ndarray, Dataset], None] | None = None

    def __post_init__(self):
        if self.interest_dim not in (2, 3):
            raise ValueError(f"interest_dim must be 2 or 3, got {self.interest_dim}")
        if self.nuisance_dim < 0:
            raise ValueError("nuisance_dim must be nonnegative")
        object.__setattr__(
            self, "parameter_box", _as_box(self.parameter_box, self.interest_dim, "parameter_box")
        )
        object.__setattr__(
            self, "nuisance_box", _as_box(self.nuisance_box, self.nuisance_dim, "nuisance_box")
        )
        if not self.parameter_names:
            names = tuple(f"theta{i + 1}" for i in range(self.interest_dim))
            object.__setattr__(self, "parameter_names", names)
        if not self.nuisance_names:
            names = tuple(f"nu{i + 1}" for i in range(self.nuisance_dim))
            object.__setattr__(self, "nuisance_names", names)
        if len(self.parameter_names) != self.interest_dim:
            raise ValueError("parameter_names length must equal interest_dim")
        lower, upper = self.parameter_box
        object.__setattr__(self, "bounded", bool(np.isfinite(lower).any() or np.isfinite(upper).any()))

    def with_parameter_box(self, lower, upper) -> "LikelihoodModel":
        """Copy of the model with a different interest-parameter box."""
        from dataclasses import replace

        return replace(self, parameter_box=(lower, upper))

    def in_box(self, theta: np.ndarray) -> bool:
        if not self.bounded:
            return True
        lower, upper = self.parameter_box
        return bool((theta >= lower).all() and (theta <= upper).all())


class EvaluationCounter:
    """Thread-safe running count of log-likelihood evaluations."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = 0

    def add(self, k: int = 1) -> None:
        with self._lock:
            self._value += k

    @property
    def value(self) -> int:
        with self._lock:
            return self._value


@dataclass(frozen=True, eq=False)
class FittedModel:
    """A model bound to data, with the MLE located.

    Everything is read-only after :func:`fit` except ``counter``, which
    accumulates log-likelihood evaluations across threads.
    """

    model: LikelihoodModel
    data: Dataset
    theta_hat: np.ndarray
    nu_hat: np.ndarray
    loglik_at_mle: float
    profile_mode: ProfileMode = ProfileMode.PLUG_IN
    counter: EvaluationCounter = field(default_factory=EvaluationCounter)

    @property
    def p(self) -> int:
        return self.model.interest_dim

    @property
    def n_evaluations(self) -> int:
        return self.counter.value

    def scales(self) -> np.ndarray | None:
        if self.model.scale_hint is None:
            return None
        return np.asarray(self.model.scale_hint(self.theta_hat, self.nu_hat, self.data), float)

    def with_mode(self, profile_mode: ProfileMode) -> "FittedModel":
        """Same fit, different profile mode, fresh evaluation counter."""
        return FittedModel(
            self.model, self.data, self.theta_hat, self.nu_hat, self.loglik_at_mle,
            ProfileMode(profile_mode),
        )


# -- simplex maximization -----------------------------------------------------


def _shrunk(box: Box) -> Box:
    lower, upper = box
    with np.errstate(invalid="ignore"):
        lo = np.where(np.isfinite(lower), lower + BOX_MARGIN * np.maximum(1.0, np.abs(lower)), lower)
        hi = np.where(np.isfinite(upper), upper - BOX_MARGIN * np.maximum(1.0, np.abs(upper)), upper)
    return lo, hi


def _clip(x: np.ndarray, box: Box) -> np.ndarray:
    return np.minimum(np.maximum(x, box[0]), box[1])


def _simplex_diameter(simplex: np.ndarray) -> float:
    diffs = simplex[:, None, :] - simplex[None, :, :]
    return float(np.sqrt((diffs**2).sum(axis=-1)).max())


@dataclass
class _MaxResult:
    x: np.ndarray
    value: float
    converged: bool
    n_calls: int


def _newton_polish(f: Callable[[np.ndarray], float], x: np.ndarray, fx: float, box: Box,
                   steps: int = 2):
    """Finite-difference Newton steps on ``f`` (to be maximized).

    The simplex search resolves the optimum only to about sqrt(machine
    epsilon) since it compares function values.  A Newton step with a
    five-point gradient stencil gets well below that.  Steps larger than the
    stencil width, or that lower ``f`` beyond rounding, are rejected.
    """
    d = len(x)
    lo, hi = box
    e = np.eye(d)
    calls = 0
    for _ in range(steps):
        h = 1e-3 * np.maximum(np.abs(x), 1e-3)
        if np.any(x - 2 * h <= lo) or np.any(x + 2 * h >= hi):
            break
        grad = np.empty(d)
        hess = np.empty((d, d))
        for i in range(d):
            f1p, f1m = f(x + h[i] * e[i]), f(x - h[i] * e[i])
            f2p, f2m = f(x + 2 * h[i] * e[i]), f(x - 2 * h[i] * e[i])
            calls += 4
            grad[i] = (8 * (f1p - f1m) - (f2p - f2m)) / (12 * h[i])
            hess[i, i] = (f1p - 2 * fx + f1m) / h[i] ** 2
        for i in range(d):
            for j in range(i + 1, d):
                fpp = f(x + h[i] * e[i] + h[j] * e[j])
                fpm = f(x + h[i] * e[i] - h[j] * e[j])
                fmp = f(x - h[i] * e[i] + h[j] * e[j])
                fmm = f(x - h[i] * e[i] - h[j] * e[j])
                calls += 4
                hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4 * h[i] * h[j])
        if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
            break
        try:
            np.linalg.cholesky(-hess)
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        if np.any(np.abs(step) > h):
            break
        x_new = x - step
        if np.any(x_new <= lo) or np.any(x_new >= hi):
            break
        f_new = f(x_new)
        calls += 1
        if not (np.isfinite(f_new) and f_new >= fx - 1e-13 * max(1.0, abs(fx))):
            break
        x, fx = x_new, f_new
    return x, fx, calls


def maximize(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    box: Box,
    *,
    restarts: int = N_RESTARTS,
    seed: int = 0,
    polish: bool = True,
) -> _MaxResult:
    """Maximize ``f`` inside ``box`` with adaptive Nelder-Mead.

    The first start is ``x0``; later starts jitter the best point found so
    far.  Each run stops once the simplex diameter is below 1e-9 or after
    10,000 iterations.  Proposals are clipped to the box shrunk by a relative
    margin of 1e-12.

    Raises:
        ConvergenceFailure: if no run reaches the diameter tolerance.
        DegenerateData: if ``f`` is non-finite at ``x0`` or the iterate
            diverges past magnitude 1e8.
    """
    box = _shrunk(box)
    x0 = _clip(np.asarray(x0, dtype=float), box)
    d = len(x0)
    n_calls = 0

    def neg(x):
        nonlocal n_calls
        if np.max(np.abs(x)) > DIVERGENCE_MAGNITUDE:
            raise DegenerateData(
                "log-likelihood appears unbounded: parameter magnitude exceeded 1e8"
            )
        n_calls += 1
        v = f(x)
        if math.isnan(v):
            return math.inf
        return -v

    f0 = f(x0)
    n_calls += 1
    if not math.isfinite(f0):
        raise DegenerateData(f"log-likelihood is not finite at the start point {x0.tolist()}")

    rng = np.random.default_rng(seed)
    best_x, best_f, any_converged = x0, f0, False
    xatol = SIMPLEX_DIAMETER / (2.0 * math.sqrt(d))
    start = x0
    for k in range(restarts):
        if k > 0:
            jitter = 0.1 * np.maximum(np.abs(best_x), 0.1) * rng.standard_normal(d)
            start = _clip(best_x + jitter, box)
            if not math.isfinite(f(start)):
                start = best_x
        res = minimize(
            neg,
            start,
            method="Nelder-Mead",
            bounds=list(zip(box[0], box[1])),
            options={
                "adaptive": True,
                "xatol": xatol,
                "fatol": math.inf,
                "maxiter": SIMPLEX_MAXITER,
                "maxfev": 50 * SIMPLEX_MAXITER,
            },
        )
        converged = _simplex_diameter(res.final_simplex[0]) <= SIMPLEX_DIAMETER
        value = -float(res.fun)
        if converged and (not any_converged or value >= best_f):
            best_x, best_f = np.asarray(res.x, float), value
        elif not any_converged and value > best_f:
            best_x, best_f = np.asarray(res.x, float), value
        any_converged = any_converged or converged
    if not any_converged:
        raise ConvergenceFailure(
            f"simplex diameter stayed above {SIMPLEX_DIAMETER:g} after "
            f"{SIMPLEX_MAXITER} iterations in all {restarts} starts"
        )
    if polish:
        best_x, best_f, extra = _newton_polish(f, best_x, best_f, box)
        n_calls += extra
    return _MaxResult(best_x, best_f, True, n_calls)


# -- fitting --------------------------------------------------------------------


def _default_start(box: Box) -> np.ndarray:
    lower, upper = box
    start = np.zeros(len(lower))
    for i, (lo, hi) in enumerate(zip(lower, upper)):
        if np.isfinite(lo) and np.isfinite(hi):
            start[i] = 0.5 * (lo + hi)
        elif np.isfinite(lo):
            start[i] = lo + 1.0
        elif np.isfinite(hi):
            start[i] = hi - 1.0
    return start


def fit(
    model: LikelihoodModel,
    data: Dataset,
    profile_mode: ProfileMode | str = ProfileMode.PLUG_IN,
    *,
    use_analytic: bool = True,
    seed: int = 0,
) -> FittedModel:
    """Locate the joint MLE of ``model`` on ``data``.

    The analytic estimator is used when the model has one (and
    ``use_analytic`` is true); otherwise the joint log-likelihood is maximized
    by :func:`maximize`.  The interest MLE must lie strictly inside the
    parameter box.
    """
    profile_mode = ProfileMode(profile_mode)
    missing = [v for v in model.variable_names if v not in data]
    if missing:
        raise DegenerateData(f"dataset lacks columns {missing} required by model {model.name!r}")
    p, q = model.interest_dim, model.nuisance_dim

    if use_analytic and model.analytic_mle is not None:
        theta_hat, nu_hat = model.analytic_mle(data)
        theta_hat = np.asarray(theta_hat, dtype=float).reshape(p)
        nu_hat = np.asarray(nu_hat, dtype=float).reshape(q)
    else:
        joint_box = (
            np.concatenate([model.parameter_box[0], model.nuisance_box[0]]),
            np.concatenate([model.parameter_box[1], model.nuisance_box[1]]),
        )
        if model.initial_guess is not None:
            x0 = np.asarray(model.initial_guess(data), dtype=float)
        else:
            x0 = _default_start(joint_box)

        def joint(x):
            return model.log_likelihood(x[:p], x[p:], data)

        res = maximize(joint, x0, joint_box, seed=seed)
        theta_hat, nu_hat = res.x[:p].copy(), res.x[p:].copy()

    if model.validate is not None:
        model.validate(theta_hat, nu_hat, data)
    lower, upper = model.parameter_box
    if not (np.all(theta_hat > lower) and np.all(theta_hat < upper)):
        raise DegenerateData(
            f"MLE {theta_hat.tolist()} is not strictly inside the parameter box"
        )
    loglik = float(model.log_likelihood(theta_hat, nu_hat, data))
    if not math.isfinite(loglik):
        raise DegenerateData("log-likelihood is not finite at the MLE")
    theta_hat.setflags(write=False)
    nu_hat.setflags(write=False)
    return FittedModel(model, data, theta_hat, nu_hat, loglik, profile_mode)


# -- profile likelihood and statistic ---------------------------------------------


def profile_nuisance(fitted: FittedModel, theta) -> tuple[np.ndarray, float, int]:
    """Maximize over the nuisance parameters at fixed ``theta``.

    Starts from the global nuisance MLE.  Returns ``(nu, loglik, n_calls)``;
    the returned log-likelihood is never below the plug-in value.
    """
    model, data = fitted.model, fitted.data
    theta = np.asarray(theta, dtype=float)
    start_val = float(model.log_likelihood(theta, fitted.nu_hat, data))
    if model.nuisance_dim == 0:
        return fitted.nu_hat, start_val, 1

    def f(nu):
        return model.log_likelihood(theta, nu, data)

    res = maximize(f, np.array(fitted.nu_hat), model.nuisance_box, restarts=1)
    calls = res.n_calls + 1
    if not (res.value >= start_val):
        return np.array(fitted.nu_hat), start_val, calls
    return res.x, res.value, calls


def _profile(fitted: FittedModel, theta: np.ndarray) -> tuple[float, int]:
    if fitted.profile_mode is ProfileMode.FULL_PROFILE and fitted.model.nuisance_dim > 0:
        _, value, calls = profile_nuisance(fitted, theta)
        return value, calls
    return float(fitted.model.log_likelihood(theta, fitted.nu_hat, fitted.data)), 1


def _check_box(fitted: FittedModel, theta: np.ndarray) -> None:
    if theta.shape != (fitted.p,):
        raise ValueError(f"theta must have shape ({fitted.p},), got {theta.shape}")
    if not fitted.model.in_box(theta):
        raise OutOfBox(f"theta={theta.tolist()} is outside the parameter box")


def profile_loglik(fitted: FittedModel, theta) -> float:
    """Profile log-likelihood at ``theta`` (plug-in or fully profiled)."""
    theta = np.asarray(theta, dtype=float)
    _check_box(fitted, theta)
    value, calls = _profile(fitted, theta)
    fitted.counter.add(calls)
    return value


def lr_statistic(fitted: FittedModel, theta) -> float:
    """Likelihood-ratio statistic ``-2 (profile_loglik(theta) - loglik_at_mle)``.

    Exactly zero at the MLE.  Adds the log-likelihood evaluations it consumes
    to ``fitted.counter`` (one per call in plug-in mode).
    """
    theta = np.asarray(theta, dtype=float)
    _check_box(fitted, theta)
    if np.array_equal(theta, fitted.theta_hat):
        fitted.counter.add(1)
        return 0.0
    value, calls = _profile(fitted, theta)
    fitted.counter.add(calls)
    return -2.0 * (value - fitted.loglik_at_mle)


def lr_statistic_many(fitted: FittedModel, thetas) -> np.ndarray:
    """Statistic at each row of ``thetas`` (shape ``(m, p)``).

    Uses the model's vectorized log-likelihood in plug-in mode when it has
    one; the counter grows by ``m`` either way in plug-in mode.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 2 or thetas.shape[1] != fitted.p:
        raise ValueError(f"thetas must have shape (m, {fitted.p})")
    lower, upper = fitted.model.parameter_box
    if not (np.all(thetas >= lower) and np.all(thetas <= upper)):
        raise OutOfBox("some grid points fall outside the parameter box")
    model = fitted.model
    if fitted.profile_mode is ProfileMode.PLUG_IN and model.batch_log_likelihood is not None:
        ll = np.asarray(model.batch_log_likelihood(thetas, fitted.nu_hat, fitted.data), float)
        fitted.counter.add(len(thetas))
        out = -2.0 * (ll - fitted.loglik_at_mle)
        out[np.all(thetas == fitted.theta_hat, axis=1)] = 0.0
        return out
    return np.array([lr_statistic(fitted, t) for t in thetas])
