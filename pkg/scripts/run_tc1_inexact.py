#!/usr/bin/env python3
"""TC1 S_N-FEM with inexact residual evaluation: same errors as the exact
variant while intermediate ranks stay far below the naive bound."""

import argparse

from common import run_study


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[128])
    p.add_argument("--output-dir", default="results/tc1_inexact")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    run_study(case="TC1", scheme="SN", sizes=args.sizes,
              variant="st_inexact",
              output_dir=args.output_dir, jobs=args.jobs)


if __name__ == "__main__":
    main()
