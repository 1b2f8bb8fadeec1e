"""Simulate a short run and write each source's saw-tooth age curve as CSV.

Columns: source, time, age. The curve is sampled just before and at every
delivery so that straight lines between rows reproduce the saw-tooth exactly.
"""

import argparse
import csv
import sys

import numpy as np

from edgefog_aoi import des
from edgefog_aoi.config import ExperimentSpec, load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--horizon", type=float, default=5.0, help="simulated seconds")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    spec = load_config(args.config) if args.config else ExperimentSpec()
    res = des.run(spec.model(), np.random.default_rng(args.seed), horizon_s=args.horizon, warmup_frac=0.0)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["source", "time", "age"])
    for tr in res.traces.values():
        t = np.concatenate(([tr.t_start], np.repeat(tr.delivery_times, 2), [tr.t_end]))
        age = tr.age_at(t)
        # left limits just before each delivery
        age[1:-1:2] = np.concatenate(([tr.age_start], tr.system_times[:-1])) + np.diff(
            np.concatenate(([tr.t_start], tr.delivery_times)))
        for ti, ai in zip(t, age):
            w.writerow([tr.source, repr(float(ti)), repr(float(ai))])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
