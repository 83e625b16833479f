"""Decay and frequency of the corrected Example I against loss fraction alpha."""

import argparse
import json

from jumpsense import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.01, 0.03, 0.05, 0.08])
    ap.add_argument("--g", type=float, default=0.01, help="signal used for the Liouvillian mode")
    ap.add_argument("--fit-g", type=float, default=0.2, help="signal used for the time-domain fit")
    args = ap.parse_args()
    sweep = dict(cli.DEFAULTS["table1"]["sweep"], g=args.g, fit_g=args.fit_g)
    print(f"{'alpha':>6} {'decay/gamma':>12} {'2a+4a^2':>9} {'freq/g':>8} {'fit m1/g':>9} "
          f"{'fit m2/gamma':>13}")
    for a in args.alphas:
        r = cli.table1_row(a, sweep)
        f = r["fit_at_fit_g"]
        print(f"{a:6.3f} {r['decay']:12.4f} {r['small_alpha_law']:9.4f} {r['frequency']:8.3f} "
              f"{f['m1_over_g']:9.3f} {f['m2_over_gamma']:13.4f}")
    if args.alphas == sweep["alphas"]:
        print(json.dumps({k: sweep[k] for k in ("reference_decay", "reference_frequency")}))


if __name__ == "__main__":
    main()
