#!/usr/bin/env python3
"""Pool the bundled seven-study table under both conversion profiles.

Writes the per-study effect tables (CSV with the pooled footer) and the
full JSON results side by side, for the legacy stepwise conversion
(profile table2) and the size-adaptive one (profile table3).
"""

import argparse
import pathlib
import sys

from optmean.cli import main as optmean


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="results", type=pathlib.Path)
    parser.add_argument("--input", default=None,
                        help="study CSV (default: bundled table)")
    args = parser.parse_args(argv)
    args.outdir.mkdir(parents=True, exist_ok=True)
    for profile in ("table2", "table3"):
        for fmt, suffix in (("csv", "csv"), ("json", "json")):
            out = args.outdir / f"case_study_{profile}.{suffix}"
            argv_out = ["meta", "--profile", profile, "--format", fmt,
                        "--output", str(out)]
            if args.input:
                argv_out += ["--input", args.input]
            code = optmean(argv_out)
            if code != 0:
                return code
            print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
