#!/usr/bin/env python3
"""TC1 S_N-FEM with the mesh-scaled tolerance 0.1/J: near-constant low
solution rank across the ladder."""

import argparse

from common import run_study


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512])
    p.add_argument("--output-dir", default="results/tc1_scaled")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    run_study(case="TC1", scheme="SN", sizes=args.sizes,
              tolerance_rule="scaled_0.1_over_J",
              output_dir=args.output_dir, jobs=args.jobs)


if __name__ == "__main__":
    main()
