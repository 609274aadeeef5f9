"""Built-in likelihood models and synthetic data generators.

``bvnorm``
    Bivariate normal; interest is the mean vector, nuisance the two
    variances and the correlation.
``tvnorm``
    Trivariate normal; interest is the mean vector, nuisance the three
    variances and three correlations.
``linreg``
    Simple Gaussian linear regression; interest is (intercept, slope),
    nuisance the error variance.

All variance estimates use the n denominator (they are MLEs).
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .exceptions import DegenerateData
from .likelihood import Dataset, FittedModel, LikelihoodModel

LOG_2PI = math.log(2.0 * math.pi)
_CORR_LIMIT = 1.0 - 1e-12

# Benchmark setup: n=10 draws, mu=(0,0), sigma^2=10, rho=0.5.
BENCH_MEAN = (0.0, 0.0)
BENCH_VARIANCE = 10.0
BENCH_RHO = 0.5
BENCH_N = 10
DEFAULT_SEED = 2


# -- multivariate normal helpers ------------------------------------------------


def _cov_from_nuisance(nu: np.ndarray, dim: int) -> np.ndarray | None:
    variances = nu[:dim]
    if np.any(variances <= 0):
        return None
    sd = np.sqrt(variances)
    corr = np.eye(dim)
    iu = np.triu_indices(dim, 1)
    corr[iu] = nu[dim:]
    corr[(iu[1], iu[0])] = nu[dim:]
    return corr * np.outer(sd, sd)


_CACHE_LIMIT = 256


def _mvn_summary(nu: np.ndarray, data: Dataset, names: tuple[str, ...]):
    """Mean-independent pieces of the normal log-likelihood for nuisance ``nu``.

    Returns ``(xbar, precision, constant)`` or None when the covariance is not
    positive definite; memoized on the dataset.
    """
    key = (names, nu.tobytes())
    hit = data.cache.get(key)
    if hit is not None or key in data.cache:
        return hit
    x = data.matrix(names)
    n, dim = x.shape
    summary = None
    cov = _cov_from_nuisance(nu, dim)
    if cov is not None:
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            chol = None
        if chol is not None:
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            xbar = x.mean(axis=0)
            within = np.linalg.solve(chol, (x - xbar).T)
            ss_within = float((within**2).sum())
            chol_inv = np.linalg.inv(chol)
            precision = chol_inv.T @ chol_inv
            constant = -0.5 * (n * (dim * LOG_2PI + logdet) + ss_within)
            summary = (xbar, n * precision, constant)
    if len(data.cache) >= _CACHE_LIMIT:
        data.cache.clear()
    data.cache[key] = summary
    return summary


def _mvn_loglik(means: np.ndarray, nu: np.ndarray, data: Dataset,
                names: tuple[str, ...]) -> np.ndarray:
    """Normal log-likelihood for each row of ``means`` (m, d).

    Uses sum_i (x_i - mu)' S^-1 (x_i - mu)
         = sum_i (x_i - xbar)' S^-1 (x_i - xbar) + n (xbar - mu)' S^-1 (xbar - mu).
    """
    summary = _mvn_summary(nu, data, names)
    if summary is None:
        return np.full(len(means), -np.inf)
    xbar, n_precision, constant = summary
    diff = xbar - means
    return constant - 0.5 * np.einsum("ij,jk,ik->i", diff, n_precision, diff)


def _moment_mle(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dim = x.shape[1]
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, bias=True)
    variances = np.diag(cov).copy()
    if np.any(variances <= 0):
        raise DegenerateData("a sample variance is zero")
    sd = np.sqrt(variances)
    corr = cov / np.outer(sd, sd)
    iu = np.triu_indices(dim, 1)
    return mean, np.concatenate([variances, corr[iu]])


def _validate_mvn(dim: int):
    def validate(theta_hat, nu_hat, data):
        if np.any(nu_hat[:dim] <= 0):
            raise DegenerateData("a variance MLE is not positive")
        if np.any(np.abs(nu_hat[dim:]) >= _CORR_LIMIT):
            raise DegenerateData("a correlation MLE is +/-1 (perfectly collinear data)")
        cov = _cov_from_nuisance(np.asarray(nu_hat), dim)
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise DegenerateData("MLE covariance matrix is not positive definite") from None

    return validate


def _mvn_model(name: str, names: tuple[str, ...], box) -> LikelihoodModel:
    dim = len(names)
    n_corr = dim * (dim - 1) // 2

    def log_likelihood(mu, nu, data):
        summary = _mvn_summary(np.asarray(nu, float), data, names)
        if summary is None:
            return -math.inf
        xbar, n_precision, constant = summary
        diff = xbar - mu
        return float(constant - 0.5 * (diff @ n_precision @ diff))

    def batch_log_likelihood(mus, nu, data):
        return _mvn_loglik(np.asarray(mus, float), np.asarray(nu, float), data, names)

    def analytic_mle(data):
        return _moment_mle(data.matrix(names))

    def initial_guess(data):
        x = data.matrix(names)
        # Deliberately rough: mean/variance from the sample, correlations zero.
        return np.concatenate([x.mean(axis=0), x.var(axis=0) + 1e-3, np.zeros(n_corr)])

    def scale_hint(theta_hat, nu_hat, data):
        return np.sqrt(np.asarray(nu_hat[:dim]) / data.n)

    def closed_form_statistic(fitted: FittedModel, theta):
        # Mahalanobis distance of theta from the mean MLE, scaled by n.
        cov = _cov_from_nuisance(np.asarray(fitted.nu_hat), dim)
        diff = np.asarray(theta, float) - fitted.theta_hat
        return float(fitted.data.n * diff @ np.linalg.solve(cov, diff))

    nuisance_names = tuple(f"var_{v}" for v in names) + tuple(
        f"rho_{names[i]}{names[j]}" for i in range(dim) for j in range(i + 1, dim)
    )
    return LikelihoodModel(
        name=name,
        interest_dim=dim,
        nuisance_dim=dim + n_corr,
        log_likelihood=log_likelihood,
        parameter_box=box,
        nuisance_box=(
            np.concatenate([np.zeros(dim), np.full(n_corr, -1.0)]),
            np.concatenate([np.full(dim, np.inf), np.full(n_corr, 1.0)]),
        ),
        analytic_mle=analytic_mle,
        variable_names=names,
        parameter_names=tuple(f"mu_{v}" for v in names),
        nuisance_names=nuisance_names,
        initial_guess=initial_guess,
        batch_log_likelihood=batch_log_likelihood,
        scale_hint=scale_hint,
        closed_form_statistic=closed_form_statistic,
        validate=_validate_mvn(dim),
    )


def bivariate_normal_model(box=None) -> LikelihoodModel:
    """Bivariate normal with the mean vector as parameters of interest.

    Data columns ``x`` and ``y``.  Nuisance order is
    ``(var_x, var_y, rho_xy)``.  The means are unbounded unless ``box`` is
    given.
    """
    return _mvn_model("bvnorm", ("x", "y"), box)


def trivariate_normal_model(box=None) -> LikelihoodModel:
    """Trivariate normal with the mean vector as parameters of interest.

    Data columns ``x``, ``y``, ``z``.  Nuisance order is
    ``(var_x, var_y, var_z, rho_xy, rho_xz, rho_yz)``.
    """
    return _mvn_model("tvnorm", ("x", "y", "z"), box)


def bivariate_normal_statistic(mle: tuple[float, float, float, float, float], n: int,
                               mu_x: float, mu_y: float) -> float:
    """Closed-form plug-in statistic for the bivariate normal mean.

    ``mle`` is ``(mu_x, mu_y, var_x, var_y, rho)``.
    """
    mx, my, vx, vy, rho = mle
    zx = (mx - mu_x) / math.sqrt(vx)
    zy = (my - mu_y) / math.sqrt(vy)
    return n / (1.0 - rho**2) * (zx**2 + zy**2 - 2.0 * rho * zx * zy)


# -- linear regression ------------------------------------------------------------------


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    xbar, ybar = x.mean(), y.mean()
    sxx = float(((x - xbar) ** 2).sum())
    if sxx == 0.0:
        raise DegenerateData("all x values are equal")
    slope = float(((x - xbar) * (y - ybar)).sum()) / sxx
    intercept = ybar - slope * xbar
    rss = float(((y - intercept - slope * x) ** 2).sum())
    return intercept, slope, rss


def linear_regression_model(box=None) -> LikelihoodModel:
    """Gaussian simple linear regression ``y = b0 + b1 x + e``.

    Interest is ``(b0, b1)``; the error variance is the single nuisance
    parameter, boxed to ``(0, inf)``.
    """

    def log_likelihood(beta, nu, data):
        s2 = nu[0]
        if s2 <= 0:
            return -math.inf
        x, y = data["x"], data["y"]
        resid = y - beta[0] - beta[1] * x
        return -0.5 * (data.n * (LOG_2PI + math.log(s2)) + float(resid @ resid) / s2)

    def batch_log_likelihood(betas, nu, data):
        s2 = nu[0]
        x, y = data["x"], data["y"]
        resid = y[None, :] - betas[:, :1] - betas[:, 1:2] * x[None, :]
        return -0.5 * (data.n * (LOG_2PI + math.log(s2)) + (resid**2).sum(axis=1) / s2)

    def analytic_mle(data):
        b0, b1, rss = _ols(data["x"], data["y"])
        return np.array([b0, b1]), np.array([rss / data.n])

    def initial_guess(data):
        y = data["y"]
        return np.array([y.mean(), 0.0, y.var() + 1e-3])

    def validate(theta_hat, nu_hat, data):
        x = data["x"]
        if np.all(x == x[0]):
            raise DegenerateData("all x values are equal")
        if not nu_hat[0] > 0:
            raise DegenerateData("residual sum of squares is zero (perfect fit)")

    def scale_hint(theta_hat, nu_hat, data):
        x = data["x"]
        sxx = float(((x - x.mean()) ** 2).sum())
        s2 = nu_hat[0]
        return np.sqrt([s2 * (1.0 / data.n + x.mean() ** 2 / sxx), s2 / sxx])

    def closed_form_statistic(fitted: FittedModel, theta):
        x, y = fitted.data["x"], fitted.data["y"]
        resid = y - theta[0] - theta[1] * x
        rss_hat = fitted.nu_hat[0] * fitted.data.n
        return float((resid @ resid - rss_hat) / fitted.nu_hat[0])

    return LikelihoodModel(
        name="linreg",
        interest_dim=2,
        nuisance_dim=1,
        log_likelihood=log_likelihood,
        parameter_box=box,
        nuisance_box=(np.array([0.0]), np.array([np.inf])),
        analytic_mle=analytic_mle,
        variable_names=("x", "y"),
        parameter_names=("beta0", "beta1"),
        nuisance_names=("sigma2",),
        initial_guess=initial_guess,
        batch_log_likelihood=batch_log_likelihood,
        scale_hint=scale_hint,
        closed_form_statistic=closed_form_statistic,
        validate=validate,
    )


MODELS: dict[str, Callable[..., LikelihoodModel]] = {
    "bvnorm": bivariate_normal_model,
    "tvnorm": trivariate_normal_model,
    "linreg": linear_regression_model,
}


def get_model(name: str) -> LikelihoodModel:
    try:
        return MODELS[name]()
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


# -- synthetic data -----------------------------------------------------------------------


def benchmark_data(seed: int = DEFAULT_SEED, n: int = BENCH_N, scale: float = 1.0) -> Dataset:
    """Bivariate normal draws for the radial-versus-grid benchmark.

    ``n`` draws with mean (0, 0), variances 10 and correlation 0.5, optionally
    multiplied by ``scale`` (the second experiment uses 10).
    """
    cov = BENCH_VARIANCE * np.array([[1.0, BENCH_RHO], [BENCH_RHO, 1.0]])
    rng = np.random.default_rng(seed)
    xy = rng.multivariate_normal(BENCH_MEAN, cov, size=n) * scale
    return Dataset({"x": xy[:, 0], "y": xy[:, 1]})


def standardized_normal_data(n: int, dim: int, seed: int = 0, center=None,
                             names: tuple[str, ...] | None = None) -> Dataset:
    """Normal draws transformed so the MLE covariance is exactly the identity.

    The sample mean equals ``center`` (zeros by default) and the
    n-denominator sample covariance is the identity, up to rounding.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, dim))
    z -= z.mean(axis=0)
    chol = np.linalg.cholesky(np.cov(z, rowvar=False, bias=True))
    z = np.linalg.solve(chol, z.T).T
    z += np.zeros(dim) if center is None else np.asarray(center, float)
    names = names or ("x", "y", "z")[:dim]
    return Dataset({k: z[:, i] for i, k in enumerate(names)})


def regression_data(n: int = 30, seed: int = 0, intercept: float = 1.0, slope: float = 2.0,
                    sigma: float = 1.0) -> Dataset:
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 10.0, n)
    y = intercept + slope * x + sigma * rng.standard_normal(n)
    return Dataset({"x": x, "y": y})
