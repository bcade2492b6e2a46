"""Meta-analysis pipeline over heterogeneous study summaries.

Studies may report a five-number-summary fragment, mean and SD, an odds
ratio with its confidence interval, or a mean with the range. Each record
is converted to a standardized mean difference (controls minus cases) with
its variance, then pooled with DerSimonian-Laird random effects alongside
Cochran's Q, the chi-square heterogeneity p-value, and the I^2 index.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence, Union

from scipy import special

from .errors import ScenarioError
from .estimators import (
    FiveNumberSummary,
    hozo_sd_from_range,
    mean_bland,
    mean_hozo,
    mean_optimal,
    mean_wan_s2,
    sd_estimate,
    wan_sd_from_extremes,
)
from .order_stats import moments_quadrature

__all__ = [
    "FiveNumberPayload",
    "MeanSdPayload",
    "OddsRatioPayload",
    "MeanRangePayload",
    "StudyRecord",
    "StudyEffect",
    "Heterogeneity",
    "MetaResult",
    "StudyConversionError",
    "PROFILES",
    "cohens_d",
    "odds_ratio_to_d",
    "heterogeneity",
    "pool_random_effects",
    "run_case_study",
    "read_study_csv",
    "load_bundled_studies",
    "bundled_table1",
]

_LN_OR_TO_D = math.sqrt(3.0) / math.pi
_Z95 = 1.96

# (mean method, SD method) pairs for the two published conversion styles:
# table2 reproduces the stepwise legacy conversion, table3 the
# size-adaptive one.
PROFILES = {
    "table2": ("hozo_as_applied", "hozo"),
    "table3": ("optimal_approx", "wan"),
}


@dataclass(frozen=True)
class FiveNumberPayload:
    cases: FiveNumberSummary
    controls: FiveNumberSummary


@dataclass(frozen=True)
class MeanSdPayload:
    mean_cases: float
    sd_cases: float
    mean_controls: float
    sd_controls: float


@dataclass(frozen=True)
class OddsRatioPayload:
    odds_ratio: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class MeanRangePayload:
    mean_cases: float
    min_cases: float
    max_cases: float
    mean_controls: float
    min_controls: float
    max_controls: float


Payload = Union[FiveNumberPayload, MeanSdPayload, OddsRatioPayload, MeanRangePayload]


@dataclass(frozen=True)
class StudyRecord:
    index: int
    label: str
    n_cases: int
    n_controls: int
    payload: Payload
    note: str = ""

    def __post_init__(self):
        if self.n_cases < 2 or self.n_controls < 2:
            raise ValueError(
                f"study {self.index}: arm sizes must be at least 2, got "
                f"{self.n_cases}/{self.n_controls}"
            )


@dataclass(frozen=True)
class StudyEffect:
    """Standardized mean difference (controls minus cases) and its variance."""

    d: float
    var_d: float

    def __post_init__(self):
        if not self.var_d > 0:
            raise ValueError(f"effect variance must be positive, got {self.var_d!r}")

    @property
    def weight(self) -> float:
        return 1.0 / self.var_d

    @property
    def ci95(self) -> tuple[float, float]:
        half = _Z95 * math.sqrt(self.var_d)
        return (self.d - half, self.d + half)


@dataclass(frozen=True)
class Heterogeneity:
    q: float
    df: int
    p_value: float
    i_squared: float


@dataclass(frozen=True)
class MetaResult:
    effects: tuple[StudyEffect, ...]
    pooled_d: float
    pooled_ci95: tuple[float, float]
    q: float
    df: int
    p_value: float
    i_squared: float
    tau_squared: float

    def to_dict(self) -> dict:
        return {
            "effects": [
                {"d": e.d, "var_d": e.var_d, "weight": e.weight,
                 "ci95": list(e.ci95)}
                for e in self.effects
            ],
            "pooled_d": self.pooled_d,
            "pooled_ci95": list(self.pooled_ci95),
            "q": self.q,
            "df": self.df,
            "p_value": self.p_value,
            "i_squared": self.i_squared,
            "tau_squared": self.tau_squared,
        }


class StudyConversionError(ValueError):
    """One or more study records could not be converted to effect sizes."""

    def __init__(self, failures: Sequence[tuple[int, str, str]]):
        self.failures = tuple(failures)
        lines = [f"study {idx} ({label}): {msg}" for idx, label, msg in self.failures]
        super().__init__(
            "could not convert {} stud{}:\n  {}".format(
                len(lines), "y" if len(lines) == 1 else "ies", "\n  ".join(lines)
            )
        )


# ---------------------------------------------------------------------------
# effect sizes


def _smd_variance(d: float, n_cases: int, n_controls: int) -> float:
    # Sampling variance of the standardized mean difference. The small-
    # sample factor N/(N-2) is required to regenerate the published study
    # weights (1/var) from the effect sizes.
    total = n_cases + n_controls
    base = total / (n_cases * n_controls) + d * d / (2.0 * total)
    return base * total / (total - 2.0)


def cohens_d(mean_cases: float, sd_cases: float, n_cases: int,
             mean_controls: float, sd_controls: float, n_controls: int) -> StudyEffect:
    """Cohen's d (controls minus cases) with the pooled SD.

    d = (mean_controls - mean_cases) / s_pooled with
    s_pooled^2 = ((n_c - 1) sd_c^2 + (n_t - 1) sd_t^2) / (n_c + n_t - 2).
    """
    if sd_cases <= 0 or sd_controls <= 0:
        raise ValueError("standard deviations must be positive")
    if n_cases < 2 or n_controls < 2:
        raise ValueError("each arm needs at least 2 observations")
    pooled_var = (((n_cases - 1) * sd_cases ** 2 + (n_controls - 1) * sd_controls ** 2)
                  / (n_cases + n_controls - 2))
    d = (mean_controls - mean_cases) / math.sqrt(pooled_var)
    return StudyEffect(d=d, var_d=_smd_variance(d, n_cases, n_controls))


def odds_ratio_to_d(odds_ratio: float, ci: tuple[float, float],
                    n_cases: int, n_controls: int) -> StudyEffect:
    """Convert an odds ratio to a standardized mean difference.

    d = ln(OR) * sqrt(3) / pi (the logistic-to-normal scale conversion);
    the variance uses the same sample-size formula as `cohens_d`.
    """
    lo, hi = ci
    if odds_ratio <= 0:
        raise ValueError(f"odds ratio must be positive, got {odds_ratio!r}")
    if not 0 < lo < hi:
        raise ValueError(f"confidence bounds must satisfy 0 < low < high, got {ci!r}")
    d = math.log(odds_ratio) * _LN_OR_TO_D
    return StudyEffect(d=d, var_d=_smd_variance(d, n_cases, n_controls))


# ---------------------------------------------------------------------------
# pooling


def heterogeneity(effects: Sequence[StudyEffect]) -> Heterogeneity:
    """Cochran's Q with its chi-square p-value and the I^2 index.

    Q = sum(w d^2) - (sum(w d))^2 / sum(w) with w = 1/var_d; the p-value is
    the upper chi-square tail at k - 1 degrees of freedom, evaluated with
    the regularized incomplete gamma function; I^2 = max(0, (Q - df)/Q)
    expressed as a percentage.
    """
    effects = list(effects)
    if len(effects) < 2:
        raise ValueError("heterogeneity needs at least 2 studies")
    sw = sum(e.weight for e in effects)
    swd = sum(e.weight * e.d for e in effects)
    swdd = sum(e.weight * e.d * e.d for e in effects)
    q = swdd - swd * swd / sw
    q = max(q, 0.0)
    df = len(effects) - 1
    p = float(special.gammaincc(df / 2.0, q / 2.0))
    i2 = 100.0 * max(0.0, (q - df) / q) if q > 0 else 0.0
    return Heterogeneity(q=q, df=df, p_value=p, i_squared=i2)


def pool_random_effects(effects: Sequence[StudyEffect]) -> MetaResult:
    """DerSimonian-Laird random-effects pooling.

    tau^2 = max(0, (Q - df) / (sum(w) - sum(w^2)/sum(w))), studies are
    re-weighted by 1/(var_d + tau^2), and the 95% CI uses the normal
    critical value on the pooled standard error.
    """
    effects = tuple(effects)
    het = heterogeneity(effects)
    sw = sum(e.weight for e in effects)
    sww = sum(e.weight ** 2 for e in effects)
    denom = sw - sww / sw
    tau2 = max(0.0, (het.q - het.df) / denom) if denom > 0 else 0.0
    star = [1.0 / (e.var_d + tau2) for e in effects]
    total = sum(star)
    pooled = sum(w * e.d for w, e in zip(star, effects)) / total
    half = _Z95 / math.sqrt(total)
    return MetaResult(
        effects=effects,
        pooled_d=pooled,
        pooled_ci95=(pooled - half, pooled + half),
        q=het.q,
        df=het.df,
        p_value=het.p_value,
        i_squared=het.i_squared,
        tau_squared=tau2,
    )


# ---------------------------------------------------------------------------
# the case-study runner


def _arm_mean(summary: FiveNumberSummary, method: str) -> float:
    if method == "hozo":
        return mean_hozo(summary, "thresholded").value
    if method == "hozo_as_applied":
        return mean_hozo(summary, "unconditional").value
    if method == "wan":
        return mean_wan_s2(summary).value
    if method == "bland":
        return mean_bland(summary).value
    if method == "optimal_approx":
        return mean_optimal(summary, "approx").value
    if method == "optimal_exact":
        return mean_optimal(summary, "exact",
                            moments=moments_quadrature(summary.n)).value
    raise ValueError(f"unknown mean method {method!r}")


def _study_effect(record: StudyRecord, mean_method: str, sd_method: str) -> StudyEffect:
    payload = record.payload
    if isinstance(payload, MeanSdPayload):
        return cohens_d(payload.mean_cases, payload.sd_cases, record.n_cases,
                        payload.mean_controls, payload.sd_controls, record.n_controls)
    if isinstance(payload, OddsRatioPayload):
        return odds_ratio_to_d(payload.odds_ratio,
                               (payload.ci_low, payload.ci_high),
                               record.n_cases, record.n_controls)
    if isinstance(payload, FiveNumberPayload):
        mean_c = _arm_mean(payload.cases, mean_method)
        mean_t = _arm_mean(payload.controls, mean_method)
        sd_c = sd_estimate(payload.cases, sd_method).value
        sd_t = sd_estimate(payload.controls, sd_method).value
        return cohens_d(mean_c, sd_c, record.n_cases,
                        mean_t, sd_t, record.n_controls)
    if isinstance(payload, MeanRangePayload):
        if sd_method == "wan":
            sd_c = wan_sd_from_extremes(payload.min_cases, payload.max_cases,
                                        record.n_cases)
            sd_t = wan_sd_from_extremes(payload.min_controls, payload.max_controls,
                                        record.n_controls)
        elif sd_method == "hozo":
            sd_c = hozo_sd_from_range(payload.min_cases, payload.max_cases,
                                      record.n_cases)
            sd_t = hozo_sd_from_range(payload.min_controls, payload.max_controls,
                                      record.n_controls)
        else:
            raise ValueError(f"unknown SD method {sd_method!r}")
        return cohens_d(payload.mean_cases, sd_c, record.n_cases,
                        payload.mean_controls, sd_t, record.n_controls)
    raise ValueError(f"unsupported payload type {type(payload).__name__}")


def run_case_study(records: Sequence[StudyRecord], mean_method: str,
                   sd_method: str) -> MetaResult:
    """Convert every record to an effect size and pool them.

    Five-number payloads go through the chosen mean and SD estimators;
    mean-with-range payloads estimate only the SD from the range; mean/SD
    and odds-ratio payloads convert directly. Any per-study failure aborts
    the run with a `StudyConversionError` listing every offending study.
    """
    records = list(records)
    if not records:
        raise ValueError("no study records supplied")
    effects = []
    failures = []
    for record in records:
        try:
            effects.append(_study_effect(record, mean_method, sd_method))
        except (ValueError, ScenarioError) as exc:
            failures.append((record.index, record.label, str(exc)))
    if failures:
        raise StudyConversionError(failures)
    return pool_random_effects(effects)


# ---------------------------------------------------------------------------
# study-record CSV input

_CSV_FIELDS = ["index", "label", "n_cases", "n_controls", "payload_type",
               "f01", "f02", "f03", "f04", "f05", "f06", "f07", "f08", "f09",
               "f10", "f11", "note"]


def _opt_float(raw: Optional[str]) -> Optional[float]:
    if raw is None or raw.strip() == "":
        return None
    return float(raw)


def _req_float(raw: Optional[str], what: str) -> float:
    value = _opt_float(raw)
    if value is None:
        raise ValueError(f"missing required field {what}")
    return value


def _parse_payload(row: dict, n_cases: int, n_controls: int) -> Payload:
    kind = row["payload_type"].strip().lower()
    f = [row.get(f"f{k:02d}") for k in range(1, 12)]
    if kind == "fivenum":
        scenario = (f[0] or "").strip().lower()
        if not scenario:
            raise ValueError("fivenum payload needs a scenario in f01")
        cases = FiveNumberSummary(
            scenario=scenario, n=n_cases,
            minimum=_opt_float(f[1]), q1=_opt_float(f[2]),
            median=_req_float(f[3], "cases median (f04)"),
            q3=_opt_float(f[4]), maximum=_opt_float(f[5]))
        controls = FiveNumberSummary(
            scenario=scenario, n=n_controls,
            minimum=_opt_float(f[6]), q1=_opt_float(f[7]),
            median=_req_float(f[8], "controls median (f09)"),
            q3=_opt_float(f[9]), maximum=_opt_float(f[10]))
        return FiveNumberPayload(cases=cases, controls=controls)
    if kind == "meansd":
        return MeanSdPayload(
            mean_cases=_req_float(f[0], "mean_cases (f01)"),
            sd_cases=_req_float(f[1], "sd_cases (f02)"),
            mean_controls=_req_float(f[2], "mean_controls (f03)"),
            sd_controls=_req_float(f[3], "sd_controls (f04)"))
    if kind == "or":
        return OddsRatioPayload(
            odds_ratio=_req_float(f[0], "odds_ratio (f01)"),
            ci_low=_req_float(f[1], "ci_low (f02)"),
            ci_high=_req_float(f[2], "ci_high (f03)"))
    if kind == "meanrange":
        return MeanRangePayload(
            mean_cases=_req_float(f[0], "mean_cases (f01)"),
            min_cases=_req_float(f[1], "min_cases (f02)"),
            max_cases=_req_float(f[2], "max_cases (f03)"),
            mean_controls=_req_float(f[3], "mean_controls (f04)"),
            min_controls=_req_float(f[4], "min_controls (f05)"),
            max_controls=_req_float(f[5], "max_controls (f06)"))
    raise ValueError(f"unknown payload type {kind!r}")


def _parse_rows(reader: csv.DictReader) -> list[StudyRecord]:
    if reader.fieldnames is None or reader.fieldnames[:5] != _CSV_FIELDS[:5]:
        raise ValueError(
            "study CSV must start with columns "
            + ",".join(_CSV_FIELDS[:5])
        )
    records = []
    for lineno, row in enumerate(reader, start=2):
        try:
            index = int(row["index"])
            record = StudyRecord(
                index=index,
                label=(row.get("label") or "").strip(),
                n_cases=int(row["n_cases"]),
                n_controls=int(row["n_controls"]),
                payload=_parse_payload(row, int(row["n_cases"]),
                                       int(row["n_controls"])),
                note=(row.get("note") or "").strip(),
            )
        except (ValueError, ScenarioError, KeyError, TypeError) as exc:
            raise ValueError(f"study CSV line {lineno}: {exc}") from exc
        records.append(record)
    if not records:
        raise ValueError("study CSV holds no data rows")
    return records


def read_study_csv(path) -> list[StudyRecord]:
    """Read study records from a CSV file.

    Rows are ``index,label,n_cases,n_controls,payload_type,f01..f11,note``
    with payload_type one of fivenum, meansd, or, meanrange; the f-columns
    are positional per payload type (see the bundled table1.csv and the
    README for the layout).
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return _parse_rows(csv.DictReader(handle))


def bundled_table1():
    """Resource handle on the bundled seven-study fixture."""
    return resources.files("optmean").joinpath("data/table1.csv")


def load_bundled_studies() -> list[StudyRecord]:
    with bundled_table1().open("r", encoding="utf-8", newline="") as handle:
        return _parse_rows(csv.DictReader(handle))
