"""Optimal and approximate weights for summary-based mean estimators.

For a normal sample reported only through parts of its five-number summary,
the sample mean is estimated as a convex combination of the mid-range
(a + b)/2, the mid-quartile range (q1 + q3)/2, and the median. The weights
minimising the estimator's mean squared error depend only on the sample
size and are computed here from standardized order-statistic moments,
together with the closed-form power-law approximations that track them.

Scenarios name which fragment a study reports:

* S1: minimum, median, maximum (plus n)
* S2: first quartile, median, third quartile (plus n)
* S3: the full five-number summary (plus n)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import FitConvergenceError, NumericalError, ScenarioError
from .order_stats import OrderStatMoments

__all__ = [
    "Scenario",
    "WeightSet",
    "FitCoefficients",
    "optimal_weight_s1",
    "optimal_weight_s2",
    "optimal_weights_s3",
    "approx_weight",
    "weighted_mse",
    "fit_power_law",
]


class Scenario(str, Enum):
    """Which part of the five-number summary a study reports."""

    S1 = "s1"
    S2 = "s2"
    S3 = "s3"

    @classmethod
    def parse(cls, value) -> "Scenario":
        if isinstance(value, Scenario):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ScenarioError(f"unknown scenario {value!r}; expected s1, s2 or s3")


@dataclass(frozen=True)
class WeightSet:
    """Scenario weights for the weighted mean estimators.

    ``w1`` is the weight on the mid-range for S1 and S3 and on the
    mid-quartile range for S2; ``w2`` (S3 only) is the weight on the
    mid-quartile range. The remaining weight 1 - w1 - w2 falls on the
    median.
    """

    scenario: Scenario
    n: int
    w1: float
    w2: Optional[float] = None
    source: str = "exact"

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        if self.n < 5:
            raise ValueError(f"n must be at least 5, got {self.n}")
        if self.source not in ("exact", "approx", "legacy", "custom"):
            raise ValueError(f"unknown weight source {self.source!r}")
        if self.scenario is Scenario.S3:
            if self.w2 is None:
                raise ScenarioError("scenario s3 requires both w1 and w2")
        elif self.w2 is not None:
            raise ScenarioError(f"scenario {self.scenario.value} takes a single weight")
        for value in (self.w1,) if self.w2 is None else (self.w1, self.w2):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"weights must lie in [0, 1], got {value!r}")
        # tiny slack for rounding at the simplex boundary w1 + w2 = 1
        if self.median_weight < -1e-12:
            raise ValueError("weights must leave a nonnegative share for the median")

    @property
    def w(self) -> float:
        """The single weight of an S1/S2 weight set."""
        if self.scenario is Scenario.S3:
            raise ScenarioError("scenario s3 carries two weights; use w1 and w2")
        return self.w1

    @property
    def median_weight(self) -> float:
        return 1.0 - self.w1 - (self.w2 or 0.0)


def optimal_weight_s1(moments: OrderStatMoments) -> WeightSet:
    """MSE-minimising weight on the mid-range for scenario S1.

    w = (4 Var(m) - 2 Cov(a+b, m)) / (Var(a+b) + 4 Var(m) - 4 Cov(a+b, m)),
    computed from standardized moments; the ratio is free of location and
    scale.
    """
    a = moments.var_extremes_sum
    c = moments.var_median
    e = moments.cov_extremes_median
    return _single_weight_set(Scenario.S1, moments.n, a, c, e)


def optimal_weight_s2(moments: OrderStatMoments) -> WeightSet:
    """MSE-minimising weight on the mid-quartile range for scenario S2."""
    b = moments.var_quartiles_sum
    c = moments.var_median
    f = moments.cov_quartiles_median
    return _single_weight_set(Scenario.S2, moments.n, b, c, f)


def _single_weight_set(scenario, n, spread_var, median_var, cross_cov) -> WeightSet:
    denom = spread_var + 4.0 * median_var - 4.0 * cross_cov
    if denom <= 0.0:
        raise NumericalError(
            f"degenerate moment set for {scenario.value} at n={n}: "
            f"MSE curvature {denom:g} is not positive"
        )
    w = (4.0 * median_var - 2.0 * cross_cov) / denom
    if not 0.0 < w < 1.0:
        raise NumericalError(
            f"optimal weight {w:g} for {scenario.value} at n={n} fell outside (0, 1); "
            "the input moments are inconsistent"
        )
    return WeightSet(scenario=scenario, n=n, w1=w, source="exact")


def optimal_weights_s3(moments: OrderStatMoments) -> WeightSet:
    """MSE-minimising weight pair (mid-range, mid-quartile range) for S3.

    Solves the symmetric 2x2 stationarity system of the MSE surface after
    confirming the coefficient matrix is positive definite, which is what
    makes the stationary point the minimum.
    """
    a = moments.var_extremes_sum
    b = moments.var_quartiles_sum
    c = moments.var_median
    d = moments.cov_extremes_quartiles
    e = moments.cov_extremes_median
    f = moments.cov_quartiles_median
    m11 = a + 4.0 * c - 4.0 * e
    m22 = b + 4.0 * c - 4.0 * f
    m12 = 4.0 * c + d - 2.0 * e - 2.0 * f
    det = m11 * m22 - m12 * m12
    if m11 <= 0.0 or det <= 0.0:
        raise NumericalError(
            f"MSE coefficient matrix for s3 at n={moments.n} is not positive "
            f"definite (leading minor {m11:g}, determinant {det:g}); "
            "the input moments are inconsistent"
        )
    r1 = 4.0 * c - 2.0 * e
    r2 = 4.0 * c - 2.0 * f
    w1 = (m22 * r1 - m12 * r2) / det
    w2 = (m11 * r2 - m12 * r1) / det
    return WeightSet(scenario=Scenario.S3, n=moments.n, w1=w1, w2=w2, source="exact")


def approx_weight(scenario, n: int) -> WeightSet:
    """Closed-form power-law approximations to the optimal weights.

    S1: 4 / (4 + n^0.75)
    S2: 0.7 + 0.39 / n
    S3: (2.2 / (2.2 + n^0.75), 0.7 - 0.72 / n^0.55)

    Unlike the exact weights these accept any integer n >= 5; below the
    fitted range they are undefined and refused.
    """
    scenario = Scenario.parse(scenario)
    n = int(n)
    if n < 5:
        raise ValueError(f"approximate weights are only defined for n >= 5, got {n}")
    if scenario is Scenario.S1:
        return WeightSet(scenario, n, 4.0 / (4.0 + n ** 0.75), source="approx")
    if scenario is Scenario.S2:
        return WeightSet(scenario, n, 0.7 + 0.39 / n, source="approx")
    return WeightSet(
        scenario,
        n,
        2.2 / (2.2 + n ** 0.75),
        0.7 - 0.72 / n ** 0.55,
        source="approx",
    )


def weighted_mse(weights: WeightSet, moments: OrderStatMoments) -> float:
    """MSE of the weighted estimator, in units of sigma^2.

    S1:  (w^2/4) Var(a+b) + (1-w)^2 Var(m) + w(1-w) Cov(a+b, m)
    S2:  the same with (q1+q3) in place of (a+b)
    S3:  the full quadratic form in (w1, w2)
    """
    if weights.n != moments.n:
        raise ValueError(
            f"weight set is for n={weights.n} but moments are for n={moments.n}"
        )
    c = moments.var_median
    if weights.scenario is Scenario.S1:
        w = weights.w1
        a = moments.var_extremes_sum
        e = moments.cov_extremes_median
        return 0.25 * w * w * a + (1 - w) ** 2 * c + w * (1 - w) * e
    if weights.scenario is Scenario.S2:
        w = weights.w1
        b = moments.var_quartiles_sum
        f = moments.cov_quartiles_median
        return 0.25 * w * w * b + (1 - w) ** 2 * c + w * (1 - w) * f
    w1, w2 = weights.w1, weights.w2
    rest = 1.0 - w1 - w2
    a = moments.var_extremes_sum
    b = moments.var_quartiles_sum
    d = moments.cov_extremes_quartiles
    e = moments.cov_extremes_median
    f = moments.cov_quartiles_median
    return (0.25 * w1 * w1 * a + 0.25 * w2 * w2 * b + rest * rest * c
            + 0.5 * w1 * w2 * d + w1 * rest * e + w2 * rest * f)


# ---------------------------------------------------------------------------
# power-law fitting


@dataclass(frozen=True)
class FitCoefficients:
    """Fitted coefficients of the per-scenario weight approximations.

    ``model`` spells out the functional form the coefficients plug into;
    ``residual`` is the total sum of squared weight errors over the fit
    grid (both weight series for S3).
    """

    scenario: Scenario
    model: str
    c1: float
    c2: float
    c3: Optional[float] = None
    c4: Optional[float] = None
    residual: float = 0.0


_MODEL_FORMS = {
    Scenario.S1: "w(n) = c1*n^c2 / (1 + c1*n^c2)",
    Scenario.S2: "w(n) = 0.7 + c1*n^c2",
    Scenario.S3: "w1(n) = c1 / (c1 + n^c2);  w2(n) = 0.7 - c3 / n^c4",
}


def _s1_model(n, c1, c2):
    k = c1 * n ** c2
    return k / (1.0 + k)


def _s1_jac(n, c1, c2):
    k = c1 * n ** c2
    base = 1.0 / (1.0 + k) ** 2
    return np.column_stack([(k / c1) * base, k * np.log(n) * base])


def _s2_model(n, c1, c2):
    return 0.7 + c1 * n ** c2


def _s2_jac(n, c1, c2):
    p = n ** c2
    return np.column_stack([p, c1 * p * np.log(n)])


def _s3_first_model(n, c1, c2):
    return c1 / (c1 + n ** c2)


def _s3_first_jac(n, c1, c2):
    p = n ** c2
    base = 1.0 / (c1 + p) ** 2
    return np.column_stack([p * base, -c1 * p * np.log(n) * base])


def _s3_second_model(n, c3, c4):
    return 0.7 - c3 * n ** -c4


def _s3_second_jac(n, c3, c4):
    p = n ** -c4
    return np.column_stack([-p, c3 * np.log(n) * p])


def _gauss_newton(model, jac, n, y, theta0, max_iter=200, step_tol=1e-12):
    """Damped Gauss-Newton on weight residuals; returns (theta, sse)."""
    theta = np.asarray(theta0, dtype=float)
    resid = model(n, *theta) - y
    sse = float(resid @ resid)
    for _ in range(max_iter):
        j = jac(n, *theta)
        g = j.T @ resid
        h = j.T @ j
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(h, g, rcond=None)[0]
        scale = 1.0
        for _ in range(30):
            cand = theta - scale * step
            cand_resid = model(n, *cand) - y
            cand_sse = float(cand_resid @ cand_resid)
            if cand_sse <= sse:
                break
            scale *= 0.5
        else:
            return theta, sse, False
        moved = np.max(np.abs(scale * step) / (1.0 + np.abs(theta)))
        theta, resid, sse = cand, cand_resid, cand_sse
        if moved < step_tol:
            return theta, sse, True
    return theta, sse, False


def _grid_start(model, n, y, c1_grid, c2_grid):
    best = None
    for c1 in c1_grid:
        for c2 in c2_grid:
            r = model(n, c1, c2) - y
            sse = float(r @ r)
            if best is None or sse < best[1]:
                best = ((c1, c2), sse)
    return best[0]


def _fit_single(model, jac, n, y, c1_grid, c2_grid):
    theta0 = _grid_start(model, n, y, c1_grid, c2_grid)
    theta, sse, converged = _gauss_newton(model, jac, n, y, theta0)
    return theta, sse, converged


def fit_power_law(grid: Sequence[tuple], scenario) -> FitCoefficients:
    """Refit the weight approximations to a table of true weights.

    ``grid`` holds ``(n, w)`` rows for S1/S2 and ``(n, w1, w2)`` rows for
    S3. The criterion is unweighted least squares on the weights, solved by
    a coarse grid search refined with damped Gauss-Newton. Fewer than four
    rows leave the two-parameter models underdetermined and are refused;
    a fit that stalls raises ``FitConvergenceError`` carrying the best
    coefficients found so far.
    """
    scenario = Scenario.parse(scenario)
    rows = list(grid)
    if len(rows) < 4:
        raise ValueError(
            f"need at least 4 grid points to fit, got {len(rows)}"
        )
    want = 3 if scenario is Scenario.S3 else 2
    for row in rows:
        if len(row) != want:
            raise ValueError(
                f"scenario {scenario.value} expects rows of length {want}, got {row!r}"
            )
    n = np.array([float(r[0]) for r in rows])
    if np.any(n < 5):
        raise ValueError("grid sample sizes must be at least 5")
    ys = [np.array([float(r[k]) for r in rows]) for k in range(1, want)]
    for y in ys:
        if np.any((y < 0.0) | (y > 1.0)):
            raise ValueError("grid weights must lie in [0, 1]")

    if scenario is Scenario.S1:
        theta, sse, ok = _fit_single(
            _s1_model, _s1_jac, n, ys[0],
            np.geomspace(0.5, 20.0, 24), np.linspace(-1.5, -0.25, 26))
        coeff = FitCoefficients(scenario, _MODEL_FORMS[scenario],
                                c1=theta[0], c2=theta[1], residual=sse)
        bad = not ok
    elif scenario is Scenario.S2:
        theta, sse, ok = _fit_single(
            _s2_model, _s2_jac, n, ys[0],
            np.geomspace(0.02, 2.0, 24), np.linspace(-2.0, -0.4, 26))
        coeff = FitCoefficients(scenario, _MODEL_FORMS[scenario],
                                c1=theta[0], c2=theta[1], residual=sse)
        bad = not ok
    else:
        t_first, sse1, ok1 = _fit_single(
            _s3_first_model, _s3_first_jac, n, ys[0],
            np.geomspace(0.5, 20.0, 24), np.linspace(0.25, 1.5, 26))
        t_second, sse2, ok2 = _fit_single(
            _s3_second_model, _s3_second_jac, n, ys[1],
            np.geomspace(0.1, 2.0, 24), np.linspace(0.1, 1.5, 26))
        coeff = FitCoefficients(scenario, _MODEL_FORMS[scenario],
                                c1=t_first[0], c2=t_first[1],
                                c3=t_second[0], c4=t_second[1],
                                residual=sse1 + sse2)
        bad = not (ok1 and ok2)
    if bad:
        raise FitConvergenceError(
            f"power-law fit for {scenario.value} did not converge; "
            f"best residual {coeff.residual:g}", best=coeff)
    if not math.isfinite(coeff.residual):
        raise FitConvergenceError(
            f"power-law fit for {scenario.value} diverged", best=coeff)
    return coeff
