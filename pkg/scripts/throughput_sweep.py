#!/usr/bin/env python3
"""Reproduce the throughput-versus-load curves (lambda = 3 and 6).

Writes sweep_lam3.csv and sweep_lam6.csv to --outdir and prints the
comparison report for each.
"""

import argparse
import sys
from pathlib import Path

from mbaloha.cli import main as cli_main

DEFAULT_TABLE = Path(__file__).resolve().parents[1] / "data" / "moments_k50_s250.txt"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default=".", type=Path)
    parser.add_argument("--runs", default=1000, type=int)
    parser.add_argument("--seed", default=20259, type=int)
    parser.add_argument("--moment-table", default=str(DEFAULT_TABLE))
    args = parser.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)
    for lam in (3.0, 6.0):
        out = args.outdir / f"sweep_lam{lam:g}.csv"
        code = cli_main(
            [
                "sweep",
                "--m", "100",
                "--p", "0.25",
                "--lambda", str(lam),
                "--grid", "0:1:0.05",
                "--runs", str(args.runs),
                "--k-max", "34",
                "--moment-table", args.moment_table,
                "--seed", str(args.seed),
                "--out", str(out),
            ]
        )
        if code != 0:
            return code
        print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
