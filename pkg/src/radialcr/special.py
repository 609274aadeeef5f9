"""Regularized incomplete gamma function and chi-squared quantiles."""

from __future__ import annotations

import math
from dataclasses import dataclass

MAX_ITER = 500
TERM_TOL = 1e-14
_TINY = 1e-300


@dataclass(frozen=True)
class ChiSquaredThreshold:
    """The (1 - alpha) quantile of a chi-squared distribution with ``dof`` degrees of freedom."""

    alpha: float
    dof: int
    value: float

    def __float__(self) -> float:
        return self.value


def _lower_series(s: float, x: float) -> float:
    # P(s, x) = x^s e^-x / Gamma(s+1) * sum_n x^n / ((s+1)...(s+n))
    term = 1.0 / s
    total = term
    denom = s
    for _ in range(MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * TERM_TOL:
            break
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


def _upper_continued_fraction(s: float, x: float) -> float:
    # Modified Lentz evaluation of Q(s, x).
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER + 1):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < TERM_TOL:
            break
    return math.exp(-x + s * math.log(x) - math.lgamma(s)) * h


def regularized_lower_gamma(s: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(s, x).

    Uses the power series below ``x = s + 1`` and the continued fraction for
    the complement above it.

    Raises:
        ValueError: if ``s <= 0`` or ``x < 0``.
    """
    if not s > 0:
        raise ValueError(f"shape must be positive, got {s}")
    if not x >= 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < s + 1.0:
        return min(1.0, _lower_series(s, x))
    return max(0.0, 1.0 - _upper_continued_fraction(s, x))


def chi_squared_cdf(q: float, dof: int) -> float:
    return regularized_lower_gamma(dof / 2.0, q / 2.0)


def chi_squared_pdf(q: float, dof: int) -> float:
    if q <= 0.0:
        if dof == 2:
            return 0.5
        return math.inf if dof < 2 else 0.0
    k = dof / 2.0
    return math.exp((k - 1.0) * math.log(q) - q / 2.0 - k * math.log(2.0) - math.lgamma(k))


def chi_squared_quantile(alpha: float, dof: int) -> ChiSquaredThreshold:
    """Upper-tail critical value: the q with P(chi2_dof <= q) = 1 - alpha.

    Bisection on the CDF over ``[0, dof + 40 sqrt(2 dof)]`` narrows the
    bracket, then safeguarded Newton steps polish the root.

    Args:
        alpha: tail probability, strictly between 0 and 1.
        dof: degrees of freedom, a positive integer.

    Raises:
        ValueError: on alpha outside (0, 1) or dof < 1.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if int(dof) != dof or dof < 1:
        raise ValueError(f"dof must be a positive integer, got {dof}")
    dof = int(dof)
    target = 1.0 - alpha

    lo, hi = 0.0, dof + 40.0 * math.sqrt(2.0 * dof)
    while chi_squared_cdf(hi, dof) < target:  # only for absurdly small alpha
        lo, hi = hi, 2.0 * hi

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi_squared_cdf(mid, dof) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-4 * max(1.0, hi):
            break

    q = 0.5 * (lo + hi)
    for _ in range(50):
        f = chi_squared_cdf(q, dof) - target
        if f < 0:
            lo = q
        elif f > 0:
            hi = q
        else:
            break
        dens = chi_squared_pdf(q, dof)
        step = f / dens if dens > 0 else 0.0
        new = q - step
        if not lo < new < hi:
            new = 0.5 * (lo + hi)
        if abs(new - q) <= 4e-16 * max(1.0, q):
            q = new
            break
        q = new
    return ChiSquaredThreshold(alpha=float(alpha), dof=dof, value=q)
