"""Monte Carlo moments of Y = Z / reference over a (d, p) grid.

Usage: python3 scripts/mc_sweep.py --d 4 5 --p 2/3 4/5 --samples 10000 [--reference formula]
"""

import argparse
import time
from fractions import Fraction

from qdp.exact import ModelParams
from qdp.montecarlo import run_mc


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--d", type=int, nargs="+", default=[4, 5])
    ap.add_argument("--p", nargs="+", default=["2/3", "4/5"])
    ap.add_argument("--lam", default="1")
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--reference", choices=("exact", "formula"), default="formula")
    args = ap.parse_args()
    print("d,p,mean_Y,var_Y,sd_X,skewness,excess_kurtosis,seconds")
    for d in args.d:
        for p in map(Fraction, args.p):
            t = time.time()
            est = run_mc(ModelParams(d, 1, Fraction(args.lam), p), args.samples, args.seed,
                         args.reference, args.workers)
            s = est.standardized
            print(f"{d},{p},{est.mean:.6g},{est.variance:.6g},{est.xd_summary['sd']},"
                  f"{s['skewness']},{s['excess_kurtosis']},{time.time() - t:.1f}", flush=True)


if __name__ == "__main__":
    main()
