"""Command-line interface.

Subcommands: estimate, weights, fit, simulate, meta. Every output embeds
the effective configuration (seed, replicate counts, backend) in comment
lines or a JSON config block, so any result can be regenerated from its
own header. Runs with the same flags and seed produce byte-identical
output.

Exit codes: 0 success, 2 usage error, 3 input-data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from .errors import FitConvergenceError, NumericalError, ScenarioError
from .estimators import Estimate, FiveNumberSummary, mean_bland, mean_hozo, \
    mean_optimal, mean_wan_s2, mean_weighted, sd_estimate
from .meta import PROFILES, StudyConversionError, load_bundled_studies, \
    read_study_csv, run_case_study
from .order_stats import moments_mc, moments_quadrature
from .simulation import SimulationConfig, DISTRIBUTION_KINDS, \
    default_methods, distribution, run_rmse
from .weights import Scenario, WeightSet, approx_weight, fit_power_law, \
    optimal_weight_s1, optimal_weight_s2, optimal_weights_s3

DEFAULT_SEED = 7081
SEED_ENV_VAR = "OPTMEAN_SEED"
DEFAULT_WEIGHT_REPS = 2_000_000
DEFAULT_SIM_REPS = 100_000

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return DEFAULT_SEED
    return int(raw)


def _parse_grid(text: str) -> tuple[int, ...]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like start:stop:step, got {text!r}")
    start, stop, step = (int(p) for p in parts)
    if step <= 0 or stop < start:
        raise ValueError(f"bad grid {text!r}")
    return tuple(range(start, stop + 1, step))


def _write_output(path, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)


def _config_header(command: str, settings: dict) -> list[str]:
    from . import __version__
    lines = [f"# optmean {__version__} {command}"]
    for key in sorted(settings):
        lines.append(f"# {key}={_fmt(settings[key])}")
    return lines


def _emit_csv(path, command, settings, fieldnames, rows, footer=None):
    buffer = io.StringIO()
    for line in _config_header(command, settings):
        buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(fieldnames)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    for line in footer or ():
        buffer.write(line + "\n")
    _write_output(path, buffer.getvalue())


def _emit_json(path, command, settings, payload):
    from . import __version__
    document = {"command": command, "version": __version__, "config": settings}
    document.update(payload)
    _write_output(path, json.dumps(document, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# estimate

_MEAN_METHODS = ("hozo", "hozo-as-applied", "wan", "bland", "optimal-approx",
                 "optimal-exact", "weighted")
_SD_METHODS = ("wan-sd", "hozo-sd")

_SUMMARY_COLUMNS = ("scenario", "n", "min", "q1", "median", "q3", "max")


def _summary_from_values(scenario, n, values: dict) -> FiveNumberSummary:
    return FiveNumberSummary(
        scenario=scenario, n=n, median=values.get("median"),
        minimum=values.get("min"), q1=values.get("q1"),
        q3=values.get("q3"), maximum=values.get("max"))


def _run_estimate_method(args, summary: FiveNumberSummary) -> Estimate:
    method = args.method
    if method == "hozo":
        return mean_hozo(summary, "thresholded")
    if method == "hozo-as-applied":
        return mean_hozo(summary, "unconditional")
    if method == "wan":
        return mean_wan_s2(summary)
    if method == "bland":
        return mean_bland(summary)
    if method == "optimal-approx":
        return mean_optimal(summary, "approx")
    if method == "optimal-exact":
        if args.backend == "mc":
            moments = moments_mc(summary.n, args.reps, args.seed)
        else:
            moments = moments_quadrature(summary.n)
        return mean_optimal(summary, "exact", moments=moments)
    if method == "weighted":
        if args.weight is None:
            raise ValueError("--method weighted requires --weight")
        w2 = args.w2
        weights = WeightSet(summary.scenario, summary.n, args.weight, w2,
                            source="custom")
        return mean_weighted(summary, weights)
    if method == "wan-sd":
        return sd_estimate(summary, "wan")
    if method == "hozo-sd":
        return sd_estimate(summary, "hozo")
    raise ValueError(f"unknown method {method!r}")


def _estimate_row(summary: FiveNumberSummary, estimate: Estimate) -> list:
    ws = estimate.weight_set
    return [
        summary.scenario.value, summary.n, summary.minimum, summary.q1,
        summary.median, summary.q3, summary.maximum, estimate.method,
        estimate.value,
        None if ws is None else ws.w1,
        None if ws is None else ws.w2,
        None if ws is None else ws.median_weight,
        None if ws is None else ws.source,
    ]


def _cmd_estimate(args) -> int:
    settings = {"method": args.method, "seed": args.seed,
                "backend": args.backend, "reps": args.reps}
    out_fields = list(_SUMMARY_COLUMNS) + [
        "method", "value", "w1", "w2", "median_weight", "weight_source"]
    if args.input is not None:
        try:
            rows = []
            with open(args.input, "r", encoding="utf-8", newline="") as handle:
                reader = csv.DictReader(handle)
                if reader.fieldnames is None or \
                        tuple(reader.fieldnames[:7]) != _SUMMARY_COLUMNS:
                    raise ValueError(
                        "summary CSV must have columns " + ",".join(_SUMMARY_COLUMNS))
                for lineno, record in enumerate(reader, start=2):
                    try:
                        values = {
                            key: (float(record[key]) if (record.get(key) or "").strip()
                                  else None)
                            for key in ("min", "q1", "median", "q3", "max")
                        }
                        summary = _summary_from_values(
                            record["scenario"], int(record["n"]), values)
                        rows.append(_estimate_row(
                            summary, _run_estimate_method(args, summary)))
                    except (ValueError, ScenarioError) as exc:
                        raise ValueError(f"line {lineno}: {exc}") from exc
        except (OSError, ValueError, ScenarioError) as exc:
            print(f"optmean estimate: input error: {exc}", file=sys.stderr)
            return EXIT_DATA
        except NumericalError as exc:
            print(f"optmean estimate: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        settings["input"] = args.input
        _emit_csv(args.output, "estimate", settings, out_fields, rows)
        return EXIT_OK

    if args.scenario is None or args.n is None:
        args.parser.error("--scenario and --n are required without --input")
    values = {"min": args.min, "q1": args.q1, "median": args.median,
              "q3": args.q3, "max": args.max}
    try:
        summary = _summary_from_values(args.scenario, args.n, values)
        estimate = _run_estimate_method(args, summary)
    except (ValueError, ScenarioError) as exc:
        args.parser.error(str(exc))
    except NumericalError as exc:
        print(f"optmean estimate: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    row = _estimate_row(summary, estimate)
    if args.format == "json":
        _emit_json(args.output, "estimate", settings,
                   {"result": dict(zip(out_fields, row))})
    else:
        _emit_csv(args.output, "estimate", settings, out_fields, [row])
    return EXIT_OK


# ---------------------------------------------------------------------------
# weights

def _exact_weights(scenario: Scenario, n: int, backend: str, reps: int, seed: int):
    if backend == "mc":
        moments = moments_mc(n, reps, seed)
    else:
        moments = moments_quadrature(n)
    if scenario is Scenario.S1:
        return optimal_weight_s1(moments), moments.std_error
    if scenario is Scenario.S2:
        return optimal_weight_s2(moments), moments.std_error
    return optimal_weights_s3(moments), moments.std_error


def _weight_table_rows(scenario, grid, backend, reps, seed):
    rows = []
    for n in grid:
        exact, std_error = _exact_weights(scenario, n, backend, reps, seed)
        approx = approx_weight(scenario, n)
        rows.append([n, scenario.value, exact.w1, exact.w2,
                     approx.w1, approx.w2, backend, std_error])
    return rows


_WEIGHT_FIELDS = ("n", "scenario", "exact_w1", "exact_w2", "approx_w1",
                  "approx_w2", "backend", "std_error")


def _cmd_weights(args) -> int:
    scenario = Scenario.parse(args.scenario)
    if (args.n is None) == (args.grid is None):
        args.parser.error("give exactly one of --n or --grid")
    try:
        grid = (args.n,) if args.n is not None else _parse_grid(args.grid)
        for n in grid:
            if n < 5 or n % 4 != 1:
                raise ValueError(
                    f"exact weights need sample sizes of the form 4Q+1, got {n}")
    except ValueError as exc:
        args.parser.error(str(exc))
    settings = {"scenario": scenario.value, "backend": args.backend,
                "seed": args.seed, "reps": args.reps if args.backend == "mc" else None}
    try:
        rows = _weight_table_rows(scenario, grid, args.backend, args.reps, args.seed)
    except NumericalError as exc:
        print(f"optmean weights: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.format == "json":
        payload = {"rows": [dict(zip(_WEIGHT_FIELDS, row)) for row in rows]}
        _emit_json(args.output, "weights", settings, payload)
    else:
        _emit_csv(args.output, "weights", settings, _WEIGHT_FIELDS, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit

def _read_weight_table(path, scenario: Scenario):
    grid = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    reader = csv.DictReader(lines)
    for record in reader:
        if Scenario.parse(record["scenario"]) is not scenario:
            continue
        n = int(record["n"])
        if scenario is Scenario.S3:
            grid.append((n, float(record["exact_w1"]), float(record["exact_w2"])))
        else:
            grid.append((n, float(record["exact_w1"])))
    if not grid:
        raise ValueError(f"no rows for scenario {scenario.value} in {path}")
    return grid


def _cmd_fit(args) -> int:
    scenario = Scenario.parse(args.scenario)
    settings = {"scenario": scenario.value, "seed": args.seed}
    try:
        if args.input is not None:
            settings["input"] = args.input
            grid = _read_weight_table(args.input, scenario)
        else:
            grid_ns = _parse_grid(args.grid)
            settings.update({"backend": args.backend, "grid": args.grid,
                             "reps": args.reps if args.backend == "mc" else None})
            rows = _weight_table_rows(scenario, grid_ns, args.backend,
                                      args.reps, args.seed)
            if scenario is Scenario.S3:
                grid = [(r[0], r[2], r[3]) for r in rows]
            else:
                grid = [(r[0], r[2]) for r in rows]
    except (OSError, ValueError) as exc:
        print(f"optmean fit: input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"optmean fit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    try:
        coeff = fit_power_law(grid, scenario)
    except FitConvergenceError as exc:
        print(f"optmean fit: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"optmean fit: input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    result = {"scenario": scenario.value, "model": coeff.model, "c1": coeff.c1,
              "c2": coeff.c2, "c3": coeff.c3, "c4": coeff.c4,
              "residual": coeff.residual, "n_points": len(grid)}
    if args.format == "csv":
        fields = tuple(result)
        _emit_csv(args.output, "fit", settings, fields,
                  [[result[k] for k in fields]])
    else:
        _emit_json(args.output, "fit", settings, {"fit": result})
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def _cmd_simulate(args) -> int:
    try:
        spec = distribution(args.distribution)
        scenario = Scenario.parse(args.scenario)
        if args.methods:
            methods = tuple(m.strip().replace("-", "_")
                            for m in args.methods.split(",") if m.strip())
        else:
            methods = default_methods(scenario)
        config = SimulationConfig(
            distribution=spec, scenario=scenario, methods=methods,
            n_grid=_parse_grid(args.grid), replicates=args.reps, seed=args.seed)
    except (ValueError, ScenarioError) as exc:
        args.parser.error(str(exc))
    settings = {"distribution": args.distribution, "scenario": scenario.value,
                "methods": ",".join(methods), "grid": args.grid,
                "reps": args.reps, "seed": args.seed}
    try:
        report = run_rmse(config)
    except (NumericalError, ArithmeticError) as exc:
        print(f"optmean simulate: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    fields = ("distribution", "scenario", "n", "method", "rmse",
              "mc_std_error", "replicates")
    rows = [[r.distribution, r.scenario, r.n, r.method, r.rmse,
             r.mc_std_error, r.replicates] for r in report.rows]
    if args.format == "json":
        _emit_json(args.output, "simulate", settings,
                   {"rows": [dict(zip(fields, row)) for row in rows]})
    else:
        _emit_csv(args.output, "simulate", settings, fields, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# meta

def _cmd_meta(args) -> int:
    mean_method, sd_method = PROFILES[args.profile]
    if args.mean_method:
        mean_method = args.mean_method.replace("-", "_")
    if args.sd_method:
        sd_method = args.sd_method
    settings = {"input": args.input or "<bundled table1.csv>",
                "profile": args.profile, "mean_method": mean_method,
                "sd_method": sd_method}
    try:
        if args.input is None:
            records = load_bundled_studies()
        else:
            records = read_study_csv(args.input)
        result = run_case_study(records, mean_method, sd_method)
    except StudyConversionError as exc:
        print(f"optmean meta: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError, ScenarioError) as exc:
        print(f"optmean meta: input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"optmean meta: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.format == "json":
        payload = result.to_dict()
        for record, effect in zip(records, payload["effects"]):
            effect["index"] = record.index
            effect["label"] = record.label
            effect["n_cases"] = record.n_cases
            effect["n_controls"] = record.n_controls
        _emit_json(args.output, "meta", settings, {"result": payload})
        return EXIT_OK
    fields = ("index", "label", "n_cases", "n_controls", "d", "var_d",
              "weight", "ci_low", "ci_high")
    rows = []
    for record, effect in zip(records, result.effects):
        lo, hi = effect.ci95
        rows.append([record.index, record.label, record.n_cases,
                     record.n_controls, effect.d, effect.var_d,
                     effect.weight, lo, hi])
    footer = [
        f"# pooled_d={_fmt(result.pooled_d)}",
        f"# pooled_ci_low={_fmt(result.pooled_ci95[0])}",
        f"# pooled_ci_high={_fmt(result.pooled_ci95[1])}",
        f"# q={_fmt(result.q)}",
        f"# df={result.df}",
        f"# p_value={_fmt(result.p_value)}",
        f"# i_squared={_fmt(result.i_squared)}",
        f"# tau_squared={_fmt(result.tau_squared)}",
    ]
    _emit_csv(args.output, "meta", settings, fields, rows, footer=footer)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optmean",
        description="Estimate sample means from five-number-summary fragments, "
                    "tabulate optimal weights, refit their approximations, run "
                    "RMSE simulations, and pool study effect sizes.")
    sub = parser.add_subparsers(dest="command", required=True)
    seed = _default_seed()

    def common(p, default_format="csv"):
        p.add_argument("--seed", type=int, default=seed,
                       help=f"RNG seed (default {seed}; env {SEED_ENV_VAR})")
        p.add_argument("--output", default=None, help="write here instead of stdout")
        p.add_argument("--format", choices=("csv", "json"), default=default_format)
        p.set_defaults(parser=p)

    p = sub.add_parser("estimate", help="estimate a mean or SD from a summary")
    p.add_argument("--scenario", choices=("s1", "s2", "s3"))
    p.add_argument("--n", type=int)
    p.add_argument("--min", type=float)
    p.add_argument("--q1", type=float)
    p.add_argument("--median", type=float)
    p.add_argument("--q3", type=float)
    p.add_argument("--max", type=float)
    p.add_argument("--method", choices=_MEAN_METHODS + _SD_METHODS,
                   default="optimal-approx")
    p.add_argument("--weight", type=float, help="w1 for --method weighted")
    p.add_argument("--w2", type=float, help="w2 for --method weighted (s3)")
    p.add_argument("--backend", choices=("quad", "mc"), default="quad",
                   help="moment backend for --method optimal-exact")
    p.add_argument("--reps", type=int, default=DEFAULT_WEIGHT_REPS)
    p.add_argument("--input", default=None,
                   help="batch mode: CSV of summaries (scenario,n,min,q1,median,q3,max)")
    common(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("weights", help="tabulate exact and approximate weights")
    p.add_argument("--scenario", required=True, choices=("s1", "s2", "s3"))
    p.add_argument("--n", type=int)
    p.add_argument("--grid", help="inclusive start:stop:step, e.g. 5:501:4")
    p.add_argument("--backend", choices=("quad", "mc"), default="quad")
    p.add_argument("--reps", type=int, default=DEFAULT_WEIGHT_REPS)
    common(p)
    p.set_defaults(func=_cmd_weights)

    p = sub.add_parser("fit", help="refit the power-law weight approximations")
    p.add_argument("--scenario", required=True, choices=("s1", "s2", "s3"))
    p.add_argument("--input", default=None,
                   help="weight-table CSV from `optmean weights`")
    p.add_argument("--grid", default="5:101:4",
                   help="grid to regenerate when --input is absent")
    p.add_argument("--backend", choices=("quad", "mc"), default="quad")
    p.add_argument("--reps", type=int, default=DEFAULT_WEIGHT_REPS)
    common(p, default_format="json")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("simulate", help="relative-MSE comparison of estimators")
    p.add_argument("--distribution", required=True, choices=DISTRIBUTION_KINDS)
    p.add_argument("--scenario", required=True, choices=("s1", "s2", "s3"))
    p.add_argument("--methods", default=None,
                   help="comma list; default: control, legacy, optimal-approx")
    p.add_argument("--grid", default="5:101:4")
    p.add_argument("--reps", type=int, default=DEFAULT_SIM_REPS)
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("meta", help="pool study effect sizes")
    p.add_argument("--input", default=None,
                   help="study CSV (default: the bundled seven-study table)")
    p.add_argument("--profile", choices=tuple(PROFILES), default="table3")
    p.add_argument("--mean-method", default=None,
                   help="override the profile's mean estimator")
    p.add_argument("--sd-method", choices=("wan", "hozo"), default=None)
    common(p)
    p.set_defaults(func=_cmd_meta)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
