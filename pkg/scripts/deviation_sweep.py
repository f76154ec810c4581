#!/usr/bin/env python3
"""Sweep the discrete-randomization penalties over channel loss.

Writes the per-class deviation terms and their share of the phase error
rate (CSV), at the per-point optimized intensity.
"""

import argparse

from pmqkd.cli import main as cli_main


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="deviation_sweep.csv")
    parser.add_argument("--m-slices", type=int, default=6)
    parser.add_argument("--loss-min", type=float, default=10.0)
    parser.add_argument("--loss-max", type=float, default=50.0)
    parser.add_argument("--step", type=float, default=1.0)
    parser.add_argument("--n-rounds", type=float, default=1e11)
    args = parser.parse_args()

    code = cli_main([
        "deviation", "--m-slices", str(args.m_slices),
        "--loss-min", str(args.loss_min), "--loss-max", str(args.loss_max),
        "--step", str(args.step), "--n-rounds", str(args.n_rounds),
        "--output", args.output,
    ])
    if code != 0:
        raise SystemExit(code)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
