"""Fit the constant K in |log E i - 2^{d-1} log 2 - log 2 - log Xi_3| <= K d^4 2^d alpha_1^{4d}.

Usage: python3 scripts/residual_fit.py [--d 5 6] [--p 17/20 9/10 19/20 1] [--order 3]
"""

import argparse
import math
from fractions import Fraction

from qdp.clusters import alpha1, truncated_log_Xi
from qdp.exact import ModelParams, hypercube_postemp_logZ, postemp_partition
from qdp.graph import build_hypercube


def log_mean(d: int, p: Fraction) -> float:
    if d <= 5:
        return math.log(postemp_partition(build_hypercube(d), 1, p))
    return hypercube_postemp_logZ(ModelParams(d, 1, 1, p)).log2_value * math.log(2)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--d", type=int, nargs="+", default=[5, 6])
    ap.add_argument("--p", nargs="+", default=["17/20", "9/10", "19/20", "1"])
    ap.add_argument("--order", type=int, default=3)
    args = ap.parse_args()
    print("d,p,residual,scale,K")
    for d in args.d:
        for p in map(Fraction, args.p):
            prm = ModelParams(d, 1, 1, p)
            res = log_mean(d, p) - (2 ** (d - 1) + 1) * math.log(2) - float(truncated_log_Xi(prm, order=args.order))
            scale = d ** 4 * 2 ** d * float(alpha1(prm)) ** (4 * d)
            print(f"{d},{p},{res:.6e},{scale:.6e},{abs(res) / scale:.4f}", flush=True)


if __name__ == "__main__":
    main()
