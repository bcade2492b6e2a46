#!/usr/bin/env python3
"""Refit the closed-form weight approximations from first principles.

Regenerates the exact optimal weights on the fitting grid (5..101 by
default) with the quadrature backend and refits the per-scenario power
laws, printing one JSON document per scenario. The recovered coefficients
should land near (4, -0.75), (0.39, -1), and (2.2, 0.75, 0.72, 0.55).
"""

import argparse
import pathlib
import sys

from optmean.cli import main as optmean


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid", default="5:101:4")
    parser.add_argument("--outdir", default=None, type=pathlib.Path,
                        help="write fit_<scenario>.json files instead of stdout")
    args = parser.parse_args(argv)
    if args.outdir:
        args.outdir.mkdir(parents=True, exist_ok=True)
    for scenario in ("s1", "s2", "s3"):
        argv_out = ["fit", "--scenario", scenario, "--grid", args.grid]
        if args.outdir:
            out = args.outdir / f"fit_{scenario}.json"
            argv_out += ["--output", str(out)]
        code = optmean(argv_out)
        if code != 0:
            return code
        if args.outdir:
            print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
