"""Tabulate the regime label over an (a, x) grid for a bundled model.

Models: ``normal`` (p1 = p2 = 1/2, N(0,1)), ``uniform`` (U[-1, 1]),
``rademacher`` (p1 = p2 = 1/2, +-1 steps).  Output is CSV on stdout
with one row per grid point (TYPICAL when a is not above the
typical exponent), plus I(a, x) or the double-exponential bounds where defined.
"""
import argparse
import csv
import sys

import numpy as np

from brwlevel import Normal, OffspringLaw, Uniform, classify_regime, rademacher, rate_I, solve, validate_model
from brwlevel.deviation import DoubleExpBounds, ExponentialRate

STEPS = {"normal": lambda: Normal(1.0), "uniform": lambda: Uniform(1.0), "rademacher": rademacher}


def describe(res) -> str:
    if isinstance(res, ExponentialRate):
        return f"{res.I_ax:.6f}"
    if isinstance(res, DoubleExpBounds):
        return f"[{res.lower_exponent:.6f}, {res.upper_exponent:.6f}]"
    return res.kind


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("model", choices=sorted(STEPS))
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()

    model = validate_model(OffspringLaw.finite({1: 0.5, 2: 0.5}), STEPS[args.model]())
    x_hi = min(0.95 * model.L, 2.0)
    out = csv.writer(sys.stdout)
    out.writerow(["a", "x", "regime", "value"])
    for x in np.linspace(0.1, x_hi, args.points):
        for a in np.linspace(0.02, model.log_m * 1.1, args.points):
            if a <= max(model.log_m - rate_I(model.step, float(x)), 0.0):
                out.writerow([f"{a:.4f}", f"{x:.4f}", "TYPICAL", ""])
                continue
            label = classify_regime(model, float(a), float(x))
            try:
                value = describe(solve(model, float(a), float(x)))
            except Exception as exc:  # wrong regime or unsupported; keep mapping
                value = type(exc).__name__
            out.writerow([f"{a:.4f}", f"{x:.4f}", label.value, value])


if __name__ == "__main__":
    main()
