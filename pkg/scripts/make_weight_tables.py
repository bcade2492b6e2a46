#!/usr/bin/env python3
"""Regenerate the full optimal-weight tables for all three scenarios.

Writes one CSV per scenario (n, exact and approximate weights, backend,
std_error) over the 4Q+1 grid 5..501. The quadrature backend is the
default and takes a minute or two for the whole sweep; pass --backend mc
for the Monte Carlo cross-check.
"""

import argparse
import pathlib
import sys

from optmean.cli import main as optmean


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="results", type=pathlib.Path)
    parser.add_argument("--grid", default="5:501:4")
    parser.add_argument("--backend", choices=("quad", "mc"), default="quad")
    parser.add_argument("--reps", type=int, default=2_000_000)
    parser.add_argument("--seed", type=int, default=7081)
    args = parser.parse_args(argv)
    args.outdir.mkdir(parents=True, exist_ok=True)
    for scenario in ("s1", "s2", "s3"):
        out = args.outdir / f"weights_{scenario}.csv"
        code = optmean([
            "weights", "--scenario", scenario, "--grid", args.grid,
            "--backend", args.backend, "--reps", str(args.reps),
            "--seed", str(args.seed), "--output", str(out)])
        if code != 0:
            return code
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
