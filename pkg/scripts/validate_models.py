"""Compare closed-form queue waits and ages with the tandem simulator over a load grid.

Prints one row per (sources, load) point with the relative error of each
component; use it to see where the closed forms track the FCFS simulation
and where they do not.
"""

import argparse

import numpy as np

from edgefog_aoi import analytics, des
from edgefog_aoi.config import ExperimentSpec


def compare(model, packets, seed, zero_transmission=False):
    br = analytics.aoi_breakdown(model)
    sim = des.run(model, np.random.default_rng(seed), n_packets=packets, zero_transmission=zero_transmission)
    a = np.mean([[b.proc_wait, b.tx_wait, b.total] for b in br], axis=0)
    e = np.array([sim.mean_proc_wait, sim.mean_uplink_wait, sim.mean_aoi])
    return a, e


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--packets", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sources", type=int, nargs="+", default=[2, 5, 10])
    ap.add_argument("--loads", type=float, nargs="+", default=[0.1, 0.3, 0.5],
                    help="target uplink utilisation")
    args = ap.parse_args()

    spec = ExperimentSpec()
    print(f"{'J':>3} {'rho_T':>6} | {'tx wait':>22} | {'age':>22}")
    for j in args.sources:
        probe = spec.model(num_sources=j)
        per_packet = analytics.uplink_times(probe)[0]
        for load in args.loads:
            rate = load / (j * per_packet)
            model = probe.with_arrival_rates([rate] * j)
            a, e = compare(model, args.packets, args.seed)
            print(f"{j:>3} {load:>6.2f} | {a[1]:.3e} vs {e[1]:.3e} | {a[2]:.3e} vs {e[2]:.3e} "
                  f"({abs(e[2] - a[2]) / a[2]:.1%})")


if __name__ == "__main__":
    main()
