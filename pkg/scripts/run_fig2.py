"""Delayed correction: Monte-Carlo product formula against the second- and
third-order curves, plus the envelope fit."""

import argparse
import warnings

import numpy as np

from jumpsense import analytic, cli, estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tau", type=float, default=0.2)
    ap.add_argument("--g", type=float, default=0.2)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=40)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--weighted", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    warnings.simplefilter("ignore", analytic.ValidityWarning)
    p = analytic.DelayParams(args.tau, args.g, args.gamma)
    lo, hi = analytic.validity_window(p)
    hi = min(hi, 0.5 / (p.g**2 * np.sqrt(p.gamma * p.tau**3)))
    grid = np.linspace(max(lo, 5.0 / args.gamma), hi, args.points)
    cols = analytic.fig2_curves(grid, p, args.samples, args.seed, args.weighted)
    print(f"{'t':>7} {'mc':>7} {'stderr':>7} {'order2':>7} {'order3':>7}")
    for t, m, s, o2, o3 in zip(cols["t"], cols["p_exact"], cols["p_exact_stderr"],
                               cols["p_order2"], cols["p_order3"]):
        print(f"{t:7.2f} {m:7.4f} {s:7.4f} {o2:7.4f} {o3:7.4f}")
    fit = estimate.fit_damped_cosine(grid, cols["p_exact"],
                                     sigma=np.maximum(cols["p_exact_stderr"], 1e-6))
    pred = analytic.predicted_envelope(p)
    print(f"fit: envelope {fit.envelope}, m1 {fit.m1:.5f}, m2 {fit.m2:.5f}")
    print(f"predicted: gaussian exponent {pred['gaussian_exponent']:.3e}")
    print(f"frequency: {cli.adjudicate_frequency(fit, pred)}")


if __name__ == "__main__":
    main()
