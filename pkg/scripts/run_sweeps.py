"""Run the four figure sweeps (devices, slots, packet, power) and write their CSVs.

    python scripts/run_sweeps.py --out results --workers 1
    python scripts/run_sweeps.py --config configs/quick.json --only devices

Each sweep reads ``configs/<name>.json`` unless ``--config`` is given, in
which case that file is used for every sweep with the default grid.
"""

import argparse
from dataclasses import replace
from pathlib import Path

from edgefog_aoi.config import SWEEP_PARAMETERS, SweepSpec, load_config
from edgefog_aoi.harness import emit_report, run_sweep, summarise

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--only", nargs="+", choices=SWEEP_PARAMETERS, default=list(SWEEP_PARAMETERS))
    ap.add_argument("--episodes", type=int, help="override training episodes")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--timing", action="store_true")
    args = ap.parse_args()

    results, spec = {}, None
    for parameter in args.only:
        if args.config:
            spec = load_config(args.config)
            sweep = spec.sweep if spec.sweep.parameter == parameter else SweepSpec.default(parameter)
        else:
            spec = load_config(CONFIG_DIR / f"{parameter}.json")
            sweep = spec.sweep
        if args.episodes is not None:
            spec = replace(spec, train=replace(spec.train, episodes=args.episodes))
        print(f"[{parameter}] {len(sweep.values)} points x {len(spec.methods)} methods x {len(spec.seeds)} seeds")
        results[parameter] = run_sweep(spec, sweep, workers=args.workers)
    for path in emit_report(results, args.out, spec, timing=args.timing):
        print(f"wrote {path}")
    print(summarise(results), end="")


if __name__ == "__main__":
    main()
