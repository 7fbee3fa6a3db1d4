#!/usr/bin/env python3
"""Rank and regularization sweeps in the rank-dominated regime.

Writes sweep.json plus error_vs_rank.dat / error_vs_eps.dat plot data and
prints the fitted error-vs-rank exponent (the bound predicts exponent 1).
"""

import argparse
import sys
from pathlib import Path

from lowrank_oracle.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(ROOT / "configs" / "sweep_example.ini"))
    parser.add_argument("--out", default=str(ROOT / "out" / "sweep"))
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()

    argv = ["sweep", "--config", args.config, "--out", args.out, "--verbose"]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    if args.workers is not None:
        argv += ["--workers", str(args.workers)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
