#!/usr/bin/env python3
"""Run the shipped bound-verification experiment and persist its outputs.

Equivalent to ``lowrank-oracle verify --config configs/verify_example.ini``;
kept as a script so the experiment is one command from a fresh checkout.
"""

import argparse
import sys
from pathlib import Path

from lowrank_oracle.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(ROOT / "configs" / "verify_example.ini"))
    parser.add_argument("--out", default=str(ROOT / "out" / "verify"))
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()

    argv = ["verify", "--config", args.config, "--out", args.out, "--verbose"]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    if args.workers is not None:
        argv += ["--workers", str(args.workers)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
