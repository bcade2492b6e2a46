"""Normal-distribution primitives and moments of normal order statistics.

Everything downstream (optimal weights, simulations, the case study) rests
on the quantities computed here: means and second moments of the five
summary order statistics ``Z_(1) <= Z_(Q+1) <= Z_(2Q+1) <= Z_(3Q+1) <=
Z_(n)`` of a standard-normal sample of size ``n = 4Q + 1``.

Two backends are provided. ``moments_quadrature`` integrates the exact
marginal and joint order-statistic densities with adaptive Gauss-Legendre
panels and is the deterministic reference. ``moments_mc`` averages over
sorted standard-normal samples drawn from counter-based streams, so its
output is reproducible for a fixed ``(n, replicates, seed)`` regardless of
how the replicates are chunked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy import special

from ._rng import block_ranges, replicate_uniforms, stream_key
from .errors import NumericalError, ScenarioError

__all__ = [
    "NormalParams",
    "OrderIndexSet",
    "OrderStatMoments",
    "AsymptoticQuantileCov",
    "normal_pdf",
    "normal_cdf",
    "normal_quantile",
    "moments_mc",
    "moments_quadrature",
    "asymptotic_cov",
    "MIN_MC_REPLICATES",
    "MAX_QUADRATURE_SIZE",
]

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

MIN_MC_REPLICATES = 10_000
MAX_QUADRATURE_SIZE = 501

# Quadrature controls: integrands are restricted to the region holding all
# but ~1e-20 of each order statistic's mass (always inside [-10, 10], where
# the untruncated normal leaves < 1e-22 behind), and every integral is
# re-evaluated on nested panel ladders until two refinements agree.
_PANEL_LADDER = (24, 36, 54, 81)
_PANEL_TOL = 1e-8
_SUPPORT_EPS = 1e-20
_QUAD_ERROR_FLOOR = 1e-8


# ---------------------------------------------------------------------------
# scalar normal primitives


def normal_pdf(x: float) -> float:
    """Standard normal density."""
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function.

    The erfc form keeps full relative accuracy in the left tail.
    """
    return 0.5 * math.erfc(-x / _SQRT2)


def _normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / _SQRT2)


# Rational approximation coefficients (Acklam's minimax fit for the inverse
# normal CDF, |error| < 1.2e-9 before refinement).
_ACK_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
          1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_ACK_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
          6.680131188771972e01, -1.328068155288572e01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
          -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
          3.754408661907416e00)
_ACK_SPLIT = 0.02425


def _acklam_lower(q: float) -> float:
    """Initial quantile guess for q = min(p, 1 - p) in (0, 0.5]."""
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    if q >= _ACK_SPLIT:
        s = q - 0.5
        r = s * s
        num = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * s
        den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        return num / den
    t = math.sqrt(-2.0 * math.log(q))
    num = ((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]
    den = (((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0
    return num / den


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF.

    A rational initial guess is polished with one Halley step against the
    erfc-based CDF. The work happens on q = min(p, 1 - p), where the CDF is
    small and relatively accurate, so the achieved absolute accuracy is a
    few ulps across p in [1e-9, 1 - 1e-9] (far inside the 1e-10 target) and
    the round trip |Phi(z) - p| stays below 1e-12.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly in (0, 1), got {p!r}")
    q = 1.0 - p if p > 0.5 else p
    z = _acklam_lower(q)
    err = normal_cdf(z) - q
    u = err * _SQRT_2PI * math.exp(0.5 * z * z)
    z -= u / (1.0 + 0.5 * z * u)
    return -z if p > 0.5 else z


def _normal_quantile_array(p: np.ndarray) -> np.ndarray:
    """Vectorised `normal_quantile` for bulk sampling transforms.

    Assumes every entry already lies strictly inside (0, 1).
    """
    p = np.asarray(p, dtype=np.float64)
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    upper = p > 0.5
    q = np.where(upper, 1.0 - p, p)
    z = np.empty_like(q)
    mid = q >= _ACK_SPLIT
    if mid.any():
        s = q[mid] - 0.5
        r = s * s
        num = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * s
        den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        z[mid] = num / den
    tail = ~mid
    if tail.any():
        t = np.sqrt(-2.0 * np.log(q[tail]))
        num = ((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]
        den = (((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0
        z[tail] = num / den
    err = 0.5 * special.erfc(-z / _SQRT2) - q
    u = err * _SQRT_2PI * np.exp(0.5 * z * z)
    z -= u / (1.0 + 0.5 * z * u)
    return np.where(upper, -z, z)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class NormalParams:
    """Location and scale of a normal population, in data units."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")


@dataclass(frozen=True)
class OrderIndexSet:
    """The five summary ranks {1, Q+1, 2Q+1, 3Q+1, n} for n = 4Q + 1."""

    n: int
    q: int

    @classmethod
    def from_size(cls, n: int) -> "OrderIndexSet":
        n = int(n)
        if n < 5 or n % 4 != 1:
            raise ScenarioError(
                f"sample size must satisfy n = 4Q + 1 with Q >= 1, got n={n}"
            )
        return cls(n=n, q=(n - 1) // 4)

    @property
    def indices(self) -> tuple[int, int, int, int, int]:
        q = self.q
        return (1, q + 1, 2 * q + 1, 3 * q + 1, self.n)

    @property
    def minimum(self) -> int:
        return 1

    @property
    def lower_quartile(self) -> int:
        return self.q + 1

    @property
    def median(self) -> int:
        return 2 * self.q + 1

    @property
    def upper_quartile(self) -> int:
        return 3 * self.q + 1

    @property
    def maximum(self) -> int:
        return self.n


@dataclass(frozen=True)
class OrderStatMoments:
    """Means and raw second moments of the five summary order statistics.

    ``means[i] = E(Z_(i))`` and ``second_moments[(i, j)] = E(Z_(i) Z_(j))``
    for ranks i <= j drawn from the index set of ``n``. ``std_error`` is a
    single 1-sigma bound covering every entry (the Monte Carlo standard
    error, or a zero-equivalent tolerance for quadrature).
    """

    n: int
    means: Mapping[int, float]
    second_moments: Mapping[tuple[int, int], float]
    backend: str
    std_error: float

    def __post_init__(self):
        idx = OrderIndexSet.from_size(self.n)
        expected = set(idx.indices)
        if set(self.means) != expected:
            raise ValueError("means must be keyed by the five summary ranks")
        pairs = {(i, j) for i in expected for j in expected if i <= j}
        if set(self.second_moments) != pairs:
            raise ValueError("second_moments must cover all rank pairs i <= j")
        for i in expected:
            if not self.second_moments[(i, i)] > 0.0:
                raise ValueError(f"E(Z_({i})^2) must be positive")

    @property
    def index_set(self) -> OrderIndexSet:
        return OrderIndexSet.from_size(self.n)

    def mean(self, i: int) -> float:
        return self.means[i]

    def second_moment(self, i: int, j: int) -> float:
        if i > j:
            i, j = j, i
        return self.second_moments[(i, j)]

    def cov(self, i: int, j: int) -> float:
        return self.second_moment(i, j) - self.means[i] * self.means[j]

    def var(self, i: int) -> float:
        return self.cov(i, i)

    # Aggregates entering the optimal-weight formulas, all in sigma^2 = 1
    # units: the summary statistics are a = Z_(1), q1 = Z_(Q+1), and so on.

    @property
    def var_extremes_sum(self) -> float:
        """Var(a + b), the mid-range numerator scale."""
        i = self.index_set
        return (self.var(i.minimum) + self.var(i.maximum)
                + 2.0 * self.cov(i.minimum, i.maximum))

    @property
    def var_quartiles_sum(self) -> float:
        """Var(q1 + q3)."""
        i = self.index_set
        return (self.var(i.lower_quartile) + self.var(i.upper_quartile)
                + 2.0 * self.cov(i.lower_quartile, i.upper_quartile))

    @property
    def var_median(self) -> float:
        """Var(m)."""
        return self.var(self.index_set.median)

    @property
    def cov_extremes_quartiles(self) -> float:
        """Cov(a + b, q1 + q3)."""
        i = self.index_set
        return (self.cov(i.minimum, i.lower_quartile)
                + self.cov(i.minimum, i.upper_quartile)
                + self.cov(i.maximum, i.lower_quartile)
                + self.cov(i.maximum, i.upper_quartile))

    @property
    def cov_extremes_median(self) -> float:
        """Cov(a + b, m)."""
        i = self.index_set
        return self.cov(i.minimum, i.median) + self.cov(i.maximum, i.median)

    @property
    def cov_quartiles_median(self) -> float:
        """Cov(q1 + q3, m)."""
        i = self.index_set
        return (self.cov(i.lower_quartile, i.median)
                + self.cov(i.upper_quartile, i.median))

    def summary_covariance(self) -> np.ndarray:
        """Covariance matrix of (a + b, q1 + q3, m); symmetric PSD."""
        return np.array([
            [self.var_extremes_sum, self.cov_extremes_quartiles,
             self.cov_extremes_median],
            [self.cov_extremes_quartiles, self.var_quartiles_sum,
             self.cov_quartiles_median],
            [self.cov_extremes_median, self.cov_quartiles_median,
             self.var_median],
        ])


@dataclass(frozen=True)
class AsymptoticQuantileCov:
    """Large-sample covariance of two sample quantiles of a normal sample."""

    p_i: float
    p_j: float
    n: int
    value: float


def asymptotic_cov(p_i: float, p_j: float, n: int) -> AsymptoticQuantileCov:
    """Asymptotic Cov(Z_[n p_i], Z_[n p_j]) for standard-normal samples.

    Returns p_i (1 - p_j) / (n phi(z_i) phi(z_j)) with z = normal_quantile(p);
    n * value does not depend on n.
    """
    if not (0.0 < p_i <= p_j < 1.0):
        raise ValueError(
            f"quantile levels must satisfy 0 < p_i <= p_j < 1, got ({p_i}, {p_j})"
        )
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    dens_i = normal_pdf(normal_quantile(p_i))
    dens_j = normal_pdf(normal_quantile(p_j))
    value = p_i * (1.0 - p_j) / (n * dens_i * dens_j)
    return AsymptoticQuantileCov(p_i=p_i, p_j=p_j, n=int(n), value=value)


# ---------------------------------------------------------------------------
# quadrature backend


@lru_cache(maxsize=None)
def _gl_unit(order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_grid(a: float, b: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    t, wt = _gl_unit()
    edges = np.linspace(a, b, panels + 1)
    widths = np.diff(edges)
    nodes = (edges[:-1, None] + widths[:, None] * t[None, :]).ravel()
    weights = (widths[:, None] * wt[None, :]).ravel()
    return nodes, weights


def _rank_support(i: int, n: int) -> tuple[float, float]:
    """Interval holding all but ~1e-20 of the mass of Z_(i) from n."""
    lo_u = special.betaincinv(i, n - i + 1, _SUPPORT_EPS)
    hi_u = special.betaincinv(i, n - i + 1, 1.0 - _SUPPORT_EPS)
    lo = special.ndtri(max(lo_u, 1e-300))
    hi = special.ndtri(min(hi_u, 1.0 - 1e-16))
    return max(float(lo), -10.0), min(float(hi), 10.0)


def _log_pdf(x):
    return -0.5 * x * x - math.log(_SQRT_2PI)


def _log_cdf(x):
    return np.log(0.5 * special.erfc(-x / _SQRT2))


def _log_sf(x):
    return np.log(0.5 * special.erfc(x / _SQRT2))


def _cdf_gap(x, y):
    """Phi(y) - Phi(x) for y >= x without cancellation in either tail."""
    right = 0.5 * (special.erfc(x / _SQRT2) - special.erfc(y / _SQRT2))
    left = 0.5 * (special.erfc(-y / _SQRT2) - special.erfc(-x / _SQRT2))
    middle = 0.5 * (special.erf(y / _SQRT2) - special.erf(x / _SQRT2))
    return np.where(x >= 0.0, right, np.where(y <= 0.0, left, middle))


def _rank_moment_once(n: int, i: int, power: int, panels: int) -> float:
    a, b = _rank_support(i, n)
    x, w = _panel_grid(a, b, panels)
    log_c = (special.gammaln(n + 1) - special.gammaln(i)
             - special.gammaln(n - i + 1))
    with np.errstate(divide="ignore"):
        log_f = log_c + _log_pdf(x)
        if i > 1:
            log_f += (i - 1) * _log_cdf(x)
        if n - i > 0:
            log_f += (n - i) * _log_sf(x)
    return float(np.sum(w * x ** power * np.exp(log_f)))


def _rank_product_moment_once(n: int, i: int, j: int, panels: int) -> float:
    ax, bx = _rank_support(i, n)
    ay, by = _rank_support(j, n)
    x, wx = _panel_grid(ax, bx, panels)
    # inner integral runs over y in [max(x, ay), by]; map a fixed panel
    # template affinely onto each outer node's interval
    t, wt = _gl_unit()
    edges = np.linspace(0.0, 1.0, panels + 1)
    tt = (edges[:-1, None] + np.diff(edges)[:, None] * t[None, :]).ravel()
    ww = (np.diff(edges)[:, None] * wt[None, :]).ravel()
    lo = np.maximum(x, ay)
    span = by - lo
    keep = span > 0.0
    if not keep.any():
        return 0.0
    xk = x[keep][:, None]
    yk = lo[keep][:, None] + span[keep][:, None] * tt[None, :]
    wy = span[keep][:, None] * ww[None, :]
    log_c = (special.gammaln(n + 1) - special.gammaln(i)
             - special.gammaln(j - i) - special.gammaln(n - j + 1))
    with np.errstate(divide="ignore"):
        log_f = log_c + _log_pdf(xk) + _log_pdf(yk)
        if i > 1:
            log_f = log_f + (i - 1) * _log_cdf(xk)
        if j - i > 1:
            log_f = log_f + (j - i - 1) * np.log(_cdf_gap(xk, yk))
        if n - j > 0:
            log_f = log_f + (n - j) * _log_sf(yk)
    inner = np.sum(wy * xk * yk * np.exp(log_f), axis=1)
    return float(np.sum(wx[keep] * inner))


def _adaptive(evaluate) -> tuple[float, float]:
    """Refine along the panel ladder until two evaluations agree."""
    value = evaluate(_PANEL_LADDER[0])
    for panels in _PANEL_LADDER[1:]:
        refined = evaluate(panels)
        err = abs(refined - value)
        value = refined
        if err <= _PANEL_TOL:
            return value, err
    raise NumericalError(
        f"order-statistic quadrature failed to converge below {_PANEL_TOL:g} "
        f"(last panel difference {err:g})"
    )


@lru_cache(maxsize=None)
def moments_quadrature(n: int) -> OrderStatMoments:
    """Deterministic moments of the five summary order statistics.

    Supports 5 <= n <= 501 with n = 4Q + 1. Every mean and second moment is
    integrated independently (no symmetry shortcuts), so the mirror-symmetry
    identities of normal order statistics remain genuine checks on the output.
    """
    idx = OrderIndexSet.from_size(n)
    if n > MAX_QUADRATURE_SIZE:
        raise ValueError(
            f"quadrature backend supports n <= {MAX_QUADRATURE_SIZE}, got {n}"
        )
    worst = 0.0
    means = {}
    second = {}
    for i in idx.indices:
        means[i], err = _adaptive(lambda p, i=i: _rank_moment_once(n, i, 1, p))
        worst = max(worst, err)
    for a_pos, i in enumerate(idx.indices):
        for j in idx.indices[a_pos:]:
            if i == j:
                val, err = _adaptive(lambda p, i=i: _rank_moment_once(n, i, 2, p))
            else:
                val, err = _adaptive(
                    lambda p, i=i, j=j: _rank_product_moment_once(n, i, j, p)
                )
            second[(i, j)] = val
            worst = max(worst, err)
    return OrderStatMoments(
        n=n,
        means=means,
        second_moments=second,
        backend="quadrature",
        std_error=max(worst, _QUAD_ERROR_FLOOR),
    )


# ---------------------------------------------------------------------------
# Monte Carlo backend


def moments_mc(n: int, replicates: int, seed: int) -> OrderStatMoments:
    """Monte Carlo moments over sorted standard-normal samples.

    Replicate ``r`` draws its ``n`` variates from a dedicated counter window
    of a Philox stream keyed by ``(seed, n)``, and partial sums are reduced
    in fixed blocks, so the result is bit-identical for a given
    ``(n, replicates, seed)`` no matter how the work is partitioned.
    """
    idx = OrderIndexSet.from_size(n)
    replicates = int(replicates)
    if replicates < MIN_MC_REPLICATES:
        raise ValueError(
            f"refusing to run with replicates={replicates}; at least "
            f"{MIN_MC_REPLICATES} are needed for usable standard errors"
        )
    cols = np.array([i - 1 for i in idx.indices])
    sum1 = np.zeros(5)
    sum1_sq = np.zeros(5)
    sum2 = np.zeros((5, 5))
    sum2_sq = np.zeros((5, 5))
    key = stream_key("order-stat-moments", seed, n)
    for first, count in block_ranges(replicates):
        u = replicate_uniforms(key, first, count, n)
        z = _normal_quantile_array(u)
        z.sort(axis=1)
        zsel = z[:, cols]
        prod = zsel[:, :, None] * zsel[:, None, :]
        sum1 += zsel.sum(axis=0)
        sum1_sq += (zsel * zsel).sum(axis=0)
        sum2 += prod.sum(axis=0)
        sum2_sq += (prod * prod).sum(axis=0)
    t = float(replicates)
    mean1 = sum1 / t
    mean2 = sum2 / t
    se1 = np.sqrt(np.maximum(sum1_sq / t - mean1 ** 2, 0.0) / t)
    se2 = np.sqrt(np.maximum(sum2_sq / t - mean2 ** 2, 0.0) / t)
    means = {i: float(mean1[a]) for a, i in enumerate(idx.indices)}
    second = {}
    for a, i in enumerate(idx.indices):
        for b, j in enumerate(idx.indices):
            if i <= j:
                second[(i, j)] = float(mean2[a, b])
    return OrderStatMoments(
        n=n,
        means=means,
        second_moments=second,
        backend="monte_carlo",
        std_error=float(max(se1.max(), se2.max())),
    )
