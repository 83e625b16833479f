"""Optimal single-shot sensitivity against total time for the corrected
protocol and the Ramsey baseline."""

import argparse

import numpy as np

from jumpsense import estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--g", type=float, default=0.2)
    ap.add_argument("--alpha", type=float, default=0.0, help="undetected fraction")
    ap.add_argument("--decades", type=float, nargs=2, default=[1.0, 3.0])
    args = ap.parse_args()
    totals = np.logspace(*args.decades, 9)
    curves = {"protected": estimate.protected_curve(args.gamma, args.alpha),
              "ramsey": estimate.ramsey_curve(args.gamma)}
    for name, p_of in curves.items():
        pts, slope = estimate.scaling_study(p_of, args.g, totals)
        print(f"{name}: slope {slope:.4f}")
        for big_t, dg in pts:
            print(f"  T={big_t:9.2f}  delta_g={dg:.4e}")


if __name__ == "__main__":
    main()
