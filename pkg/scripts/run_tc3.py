#!/usr/bin/env python3
"""Three-layer physical benchmark (no exact solution): iteration counts and
final ranks for both angular schemes; traces are written for inspection.

The default runs the J = 128 rows only; the full ladders take hours."""

import argparse

from common import run_study


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[128])
    p.add_argument("--schemes", nargs="+", default=["SN", "PN"],
                   choices=["SN", "PN"])
    p.add_argument("--output-dir", default="results/tc3")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    for scheme in args.schemes:
        run_study(case="TC3", scheme=scheme, sizes=args.sizes,
                  eps=1e-4,
                  output_dir=f"{args.output_dir}_{scheme.lower()}",
                  jobs=args.jobs)


if __name__ == "__main__":
    main()
