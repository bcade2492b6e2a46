#!/usr/bin/env python3
"""Run the relative-MSE sweeps behind the estimator comparison figures.

Scenario S1 compares the stepwise rule against the size-adaptive weights
on all five distributions; S2 and S3 compare the equal-weight and
fixed-weight rules on the same set. One CSV per (scenario, distribution)
lands in the output directory; plotting is left to the consumer.
"""

import argparse
import pathlib
import sys

from optmean.cli import main as optmean

SWEEPS = {
    "s1": ("normal", "lognormal", "beta", "exponential", "weibull"),
    "s2": ("normal", "lognormal", "beta", "exponential", "weibull"),
    "s3": ("normal", "lognormal", "beta", "exponential", "weibull"),
}


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="results", type=pathlib.Path)
    parser.add_argument("--grid", default="5:101:4")
    parser.add_argument("--reps", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=7081)
    parser.add_argument("--scenarios", default="s1,s2,s3")
    args = parser.parse_args(argv)
    args.outdir.mkdir(parents=True, exist_ok=True)
    for scenario in args.scenarios.split(","):
        for kind in SWEEPS[scenario]:
            out = args.outdir / f"rmse_{scenario}_{kind}.csv"
            code = optmean([
                "simulate", "--distribution", kind, "--scenario", scenario,
                "--grid", args.grid, "--reps", str(args.reps),
                "--seed", str(args.seed), "--output", str(out)])
            if code != 0:
                return code
            print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
