#!/usr/bin/env python3
"""Reproduce the TC1 S_N-FEM convergence table (fixed tolerance 1e-7)."""

import argparse

from common import run_study


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[128, 256])
    p.add_argument("--output-dir", default="results/tc1_sn")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    run_study(case="TC1", scheme="SN", sizes=args.sizes,
              output_dir=args.output_dir, jobs=args.jobs)


if __name__ == "__main__":
    main()
