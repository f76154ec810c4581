#!/usr/bin/env python3
"""Generate finite-key rate-vs-distance curves for several data sizes.

Writes one CSV per data size (distance_km,loss_db,mu,p_s,rate), with the
intensity optimized per point at a fixed sampling fraction.
"""

import argparse
import pathlib

from pmqkd.cli import main as cli_main


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="curves", help="output directory")
    parser.add_argument("--n-rounds", nargs="+", type=float,
                        default=[1e10, 1e11, 1e12])
    parser.add_argument("--d-min", type=float, default=10.0)
    parser.add_argument("--d-max", type=float, default=340.0)
    parser.add_argument("--step", type=float, default=10.0)
    parser.add_argument("--m-slices", type=int, default=8)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for n in args.n_rounds:
        out = outdir / f"rate_curve_N{n:.0e}.csv"
        code = cli_main([
            "scan", "--d-min", str(args.d_min), "--d-max", str(args.d_max),
            "--step", str(args.step), "--n-rounds", str(n),
            "--m-slices", str(args.m_slices), "--jobs", str(args.jobs),
            "--output", str(out),
        ])
        if code != 0:
            raise SystemExit(code)
        print(f"wrote {out}")


if __name__ == "__main__":
    main()
