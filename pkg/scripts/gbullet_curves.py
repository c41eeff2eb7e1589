#!/usr/bin/env python3
"""Max-load curves G(lambda, eps) for both decoders, eps in {0.08, 0.1, 0.2}.

The non-cooperative curve needs a fine load grid at small G, so the grid is
a composite: step 0.005 up to G = 0.30, step 0.01 above.
"""

import argparse
import sys
from pathlib import Path

from mbaloha.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="gbullet.csv", type=Path)
    parser.add_argument("--runs", default=200, type=int)
    parser.add_argument("--seed", default=20259, type=int)
    parser.add_argument("--lambdas", default="1.5,2,2.5,3,3.5,4,4.5,5,6,7,8")
    args = parser.parse_args()
    fine = [f"{0.005 * i:g}" for i in range(61)]
    coarse = [f"{0.31 + 0.01 * i:.2f}" for i in range(50)]
    grid = ",".join(fine + coarse)
    code = cli_main(
        [
            "gbullet",
            "--m", "100",
            "--p", "0.25",
            "--lambdas", args.lambdas,
            "--eps", "0.08,0.1,0.2",
            "--grid", grid,
            "--runs", str(args.runs),
            "--seed", str(args.seed),
            "--out", str(args.out),
        ]
    )
    if code == 0:
        print(f"wrote {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
