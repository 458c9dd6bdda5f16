#!/usr/bin/env python3
"""Run the estimator-comparison study for all three contracts and write CSVs.

Desk scale finishes in under a minute; full scale reproduces the benchmark
tables (40,000 paths, 100 sets) and takes a few minutes.

    python scripts/run_tables.py --scale desk --outdir results/
"""

import argparse
import dataclasses
import pathlib
import sys
import time

from lsmc.contracts import PAYOFF_KINDS
from lsmc.harness import csv_text, default_config, emit_csv, run_experiment1


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", default="desk", choices=("desk", "paper"))
    parser.add_argument("--outdir", default="results")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--control-variate", action="store_true")
    args = parser.parse_args()

    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for case in PAYOFF_KINDS:
        config = default_config(case, experiment=1, scale=args.scale)
        config = dataclasses.replace(
            config, threads=args.threads, control_variate=args.control_variate
        )
        t0 = time.perf_counter()
        report = run_experiment1(config)
        target = outdir / f"experiment1_{case}_{args.scale}.csv"
        emit_csv(report, str(target))
        print(f"{case}: {time.perf_counter() - t0:.1f}s -> {target}")
        print(csv_text(report), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
