"""Wrong-subspace population after a fixed time for the energy-gap and Zeno
dephasing strategies."""

import argparse

import numpy as np

from jumpsense import master, protocols
from jumpsense.master import MasterConfig
from jumpsense.protocols import DephasingStrategy, NoiseModel


def leakage(strategy, g, gamma, duration, dt):
    code = protocols.build_example_i(g, gamma, strategy)
    cfg = MasterConfig(code, NoiseModel(gamma=gamma), g, duration, dt=dt, record_every=10**9,
                       keep_states=True)
    return master.leakage(code, master.integrate(cfg).states[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--g", type=float, default=0.2)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--duration", type=float, default=5.0)
    args = ap.parse_args()
    gaps = np.array([10.0, 20.0, 40.0, 80.0])
    leak = [leakage(DephasingStrategy("energy_gap", gap=w), args.g, args.gamma, args.duration,
                    0.005 / w) for w in gaps]
    for w, x in zip(gaps, leak):
        print(f"gap {w:6.1f}: leakage {x:.3e}")
    print(f"slope vs gamma/gap: {np.polyfit(np.log(args.gamma / gaps), np.log(leak), 1)[0]:.4f}")
    steps = np.array([0.04, 0.02, 0.01, 0.005])
    leak = [leakage(DephasingStrategy("zeno", zeno_interval=d), args.g, args.gamma, args.duration,
                    0.0005) for d in steps]
    for d, x in zip(steps, leak):
        print(f"zeno interval {d:6.3f}: leakage {x:.3e}")
    print(f"slope vs gamma*interval: {np.polyfit(np.log(args.gamma * steps), np.log(leak), 1)[0]:.4f}")


if __name__ == "__main__":
    main()
