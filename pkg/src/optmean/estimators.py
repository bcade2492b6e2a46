"""Sample-mean and standard-deviation estimators from summary fragments.

All mean estimators are convex combinations of the mid-range, the
mid-quartile range, and the median, so the legacy rules (Hozo, Wan, Bland)
are expressed as fixed weight sets and evaluated through the exact same
arithmetic as the size-adaptive optimal estimators. Companion standard
deviation estimators (the quantile-based rule and Hozo's range rules) are
included because the meta-analysis pipeline needs both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import ScenarioError
from .order_stats import OrderStatMoments, normal_quantile
from .weights import (
    Scenario,
    WeightSet,
    approx_weight,
    optimal_weight_s1,
    optimal_weight_s2,
    optimal_weights_s3,
)

__all__ = [
    "FiveNumberSummary",
    "Estimate",
    "mean_hozo",
    "mean_wan_s2",
    "mean_bland",
    "mean_weighted",
    "mean_optimal",
    "sd_estimate",
    "wan_sd_from_extremes",
    "wan_sd_from_quartiles",
    "hozo_sd_from_range",
]

_FIELDS_BY_SCENARIO = {
    Scenario.S1: ("minimum", "median", "maximum"),
    Scenario.S2: ("q1", "median", "q3"),
    Scenario.S3: ("minimum", "q1", "median", "q3", "maximum"),
}


@dataclass(frozen=True)
class FiveNumberSummary:
    """A study's reported summary fragment, in data units.

    Only the fields belonging to the scenario may be present: S1 carries
    (minimum, median, maximum), S2 carries (q1, median, q3), and S3 all
    five. Present values must be ordered.
    """

    scenario: Scenario
    n: int
    median: float
    minimum: Optional[float] = None
    q1: Optional[float] = None
    q3: Optional[float] = None
    maximum: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        if int(self.n) != self.n or self.n < 5:
            raise ValueError(f"sample size must be an integer >= 5, got {self.n!r}")
        wanted = _FIELDS_BY_SCENARIO[self.scenario]
        for name in ("minimum", "q1", "median", "q3", "maximum"):
            value = getattr(self, name)
            if name in wanted and value is None:
                raise ScenarioError(
                    f"scenario {self.scenario.value} requires field {name!r}"
                )
            if name not in wanted and value is not None:
                raise ScenarioError(
                    f"scenario {self.scenario.value} does not take field {name!r}"
                )
        values = self.present_values()
        if any(lo > hi for lo, hi in zip(values, values[1:])):
            raise ValueError(f"summary values must be ordered, got {values}")

    def present_values(self) -> tuple[float, ...]:
        """The reported values in their natural order."""
        return tuple(
            getattr(self, name)
            for name in ("minimum", "q1", "median", "q3", "maximum")
            if getattr(self, name) is not None
        )

    @property
    def mid_range(self) -> float:
        if self.minimum is None or self.maximum is None:
            raise ScenarioError("mid-range needs the minimum and maximum")
        return (self.minimum + self.maximum) / 2.0

    @property
    def mid_quartile(self) -> float:
        if self.q1 is None or self.q3 is None:
            raise ScenarioError("mid-quartile range needs both quartiles")
        return (self.q1 + self.q3) / 2.0


@dataclass(frozen=True)
class Estimate:
    """A mean or SD estimate with the method and weights that produced it."""

    value: float
    method: str
    weight_set: Optional[WeightSet] = None


def _weighted_value(summary: FiveNumberSummary, weights: WeightSet) -> float:
    if weights.scenario is not summary.scenario:
        raise ScenarioError(
            f"weight set is for scenario {weights.scenario.value} but the summary "
            f"is {summary.scenario.value}"
        )
    if weights.n != summary.n:
        raise ValueError(
            f"weight set is for n={weights.n} but the summary has n={summary.n}"
        )
    if summary.scenario is Scenario.S1:
        return weights.w1 * summary.mid_range + (1.0 - weights.w1) * summary.median
    if summary.scenario is Scenario.S2:
        return weights.w1 * summary.mid_quartile + (1.0 - weights.w1) * summary.median
    return (weights.w1 * summary.mid_range
            + weights.w2 * summary.mid_quartile
            + (1.0 - weights.w1 - weights.w2) * summary.median)


def mean_weighted(summary: FiveNumberSummary, weights: WeightSet) -> Estimate:
    """Weighted mean estimate with caller-supplied weights."""
    return Estimate(_weighted_value(summary, weights), "custom_weight", weights)


def mean_hozo(summary: FiveNumberSummary, mode: str = "thresholded") -> Estimate:
    """Hozo's S1 estimator.

    ``thresholded`` applies (a + 2m + b)/4 for n <= 25 and the bare median
    above; ``unconditional`` applies (a + 2m + b)/4 at every n, which is how
    the rule is commonly applied in published pooled analyses.
    """
    _require_scenario(summary, Scenario.S1)
    if mode == "thresholded":
        w = 0.5 if summary.n <= 25 else 0.0
        method = "hozo"
    elif mode == "unconditional":
        w = 0.5
        method = "hozo_as_applied"
    else:
        raise ValueError(f"unknown hozo mode {mode!r}")
    weights = WeightSet(Scenario.S1, summary.n, w, source="legacy")
    return Estimate(_weighted_value(summary, weights), method, weights)


def mean_wan_s2(summary: FiveNumberSummary) -> Estimate:
    """The equal-weight S2 estimator (q1 + m + q3)/3, i.e. w = 2/3."""
    _require_scenario(summary, Scenario.S2)
    weights = WeightSet(Scenario.S2, summary.n, 2.0 / 3.0, source="legacy")
    return Estimate(_weighted_value(summary, weights), "wan_mean", weights)


def mean_bland(summary: FiveNumberSummary) -> Estimate:
    """The fixed-weight S3 estimator (a + 2 q1 + 2m + 2 q3 + b)/8."""
    _require_scenario(summary, Scenario.S3)
    weights = WeightSet(Scenario.S3, summary.n, 0.25, 0.5, source="legacy")
    return Estimate(_weighted_value(summary, weights), "bland", weights)


def mean_optimal(summary: FiveNumberSummary, source: str = "approx",
                 moments: Optional[OrderStatMoments] = None) -> Estimate:
    """Size-adaptive optimally weighted mean estimate.

    ``source='approx'`` uses the closed-form weights and works for any
    n >= 5. ``source='exact'`` needs order-statistic ``moments`` for the
    summary's n (which restricts n to the 4Q + 1 sizes).
    """
    if source == "approx":
        weights = approx_weight(summary.scenario, summary.n)
        method = "optimal_approx"
    elif source == "exact":
        if moments is None:
            raise ValueError("source='exact' requires order-statistic moments")
        if moments.n != summary.n:
            raise ValueError(
                f"moments are for n={moments.n} but the summary has n={summary.n}"
            )
        if summary.scenario is Scenario.S1:
            weights = optimal_weight_s1(moments)
        elif summary.scenario is Scenario.S2:
            weights = optimal_weight_s2(moments)
        else:
            weights = optimal_weights_s3(moments)
        method = "optimal_exact"
    else:
        raise ValueError(f"unknown weight source {source!r}")
    return Estimate(_weighted_value(summary, weights), method, weights)


# ---------------------------------------------------------------------------
# standard deviation estimators


def wan_sd_from_extremes(minimum: float, maximum: float, n: int) -> float:
    """Quantile-based SD estimate from the range: (b - a) / (2 z_n).

    z_n is the expected standardized position of the extremes,
    normal_quantile((n - 0.375) / (n + 0.25)).
    """
    _check_sd_inputs(minimum, maximum, n)
    return (maximum - minimum) / (2.0 * normal_quantile((n - 0.375) / (n + 0.25)))


def wan_sd_from_quartiles(q1: float, q3: float, n: int) -> float:
    """Quantile-based SD estimate from the interquartile range."""
    _check_sd_inputs(q1, q3, n)
    return (q3 - q1) / (2.0 * normal_quantile((0.75 * n - 0.125) / (n + 0.25)))


def hozo_sd_from_range(minimum: float, maximum: float, n: int,
                       median: Optional[float] = None) -> float:
    """Hozo's stepwise SD rules from the range.

    n <= 15 uses sqrt(((a - 2m + b)^2 / 4 + (b - a)^2) / 12) and therefore
    needs the median; 15 < n <= 70 uses range/4; larger n uses range/6.
    """
    _check_sd_inputs(minimum, maximum, n)
    if n <= 15:
        if median is None:
            raise ValueError("hozo SD needs the median when n <= 15")
        spread = minimum - 2.0 * median + maximum
        return ((spread * spread / 4.0 + (maximum - minimum) ** 2) / 12.0) ** 0.5
    if n <= 70:
        return (maximum - minimum) / 4.0
    return (maximum - minimum) / 6.0


def sd_estimate(summary: FiveNumberSummary, method: str = "wan") -> Estimate:
    """Standard deviation estimate from a summary fragment.

    ``wan`` uses the range for S1, the interquartile range for S2, and the
    average of the two for S3. ``hozo`` applies the stepwise range rules and
    is defined for S1 only.
    """
    if method == "wan":
        if summary.scenario is Scenario.S1:
            value = wan_sd_from_extremes(summary.minimum, summary.maximum, summary.n)
        elif summary.scenario is Scenario.S2:
            value = wan_sd_from_quartiles(summary.q1, summary.q3, summary.n)
        else:
            value = 0.5 * (
                wan_sd_from_extremes(summary.minimum, summary.maximum, summary.n)
                + wan_sd_from_quartiles(summary.q1, summary.q3, summary.n)
            )
        return Estimate(value, "wan_sd")
    if method == "hozo":
        _require_scenario(summary, Scenario.S1)
        value = hozo_sd_from_range(
            summary.minimum, summary.maximum, summary.n, median=summary.median
        )
        return Estimate(value, "hozo_sd")
    raise ValueError(f"unknown SD method {method!r}")


def _require_scenario(summary: FiveNumberSummary, scenario: Scenario):
    if summary.scenario is not scenario:
        raise ScenarioError(
            f"estimator needs a scenario {scenario.value} summary, "
            f"got {summary.scenario.value}"
        )


def _check_sd_inputs(lower: float, upper: float, n: int):
    if n < 5:
        raise ValueError(f"SD estimation needs n >= 5, got {n}")
    if upper < lower:
        raise ValueError(f"summary values out of order: {lower} > {upper}")
