"""Finite-n slope -(1/n) log P(Z_n[xn, inf) >= e^{an}) against the limit rate.

Default instance: p1 = p2 = 1/2, N(0, 1) steps, x = 1, a = 0.2.
Prints a CSV to stdout; the gap column shows how slowly the limit is reached.
"""
import argparse
import csv
import math
import sys

from brwlevel import Normal, OffspringLaw, rate_Iax, validate_model
from brwlevel.sim import estimate_upper_dev


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, default=0.2)
    ap.add_argument("--x", type=float, default=1.0)
    ap.add_argument("--n", type=int, nargs="+", default=[4, 6, 8, 10, 12])
    ap.add_argument("--replicates", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    model = validate_model(OffspringLaw.finite({1: 0.5, 2: 0.5}), Normal(1.0))
    limit = rate_Iax(model, args.a, args.x).I_ax
    out = csv.writer(sys.stdout)
    out.writerow(["n", "replicates", "successes", "p_hat", "slope", "limit", "gap", "n_times_gap"])
    for n in args.n:
        est = estimate_upper_dev(model, args.a, args.x, n, args.replicates, args.seed + n)
        slope = -math.log(est.p_hat) / n if est.p_hat > 0 else math.inf
        gap = slope - limit
        out.writerow([n, est.replicates, est.successes, f"{est.p_hat:.6g}", f"{slope:.5f}",
                      f"{limit:.5f}", f"{gap:.5f}", f"{n * gap:.3f}"])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
