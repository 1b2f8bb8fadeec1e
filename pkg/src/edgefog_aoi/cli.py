"""Command-line entry point: ``edgefog-aoi <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analytics, des
from .agents import evaluate, random_policy, train
from .channel import expected_tx_time, sample_tx_time
from .config import METHODS, SWEEP_PARAMETERS, ExperimentSpec, SweepSpec, load_config
from .harness import (CONVERGENCE_FILE, FIGURE_FILES, convergence_csv, emit_report, env_factory, read_rows,
                      run_sweep, summarise)
from .net import save_params


def _spec(args) -> ExperimentSpec:
    spec = load_config(args.config) if args.config else ExperimentSpec()
    if args.seed is not None:
        spec = replace(spec, seeds=tuple(range(args.seed, args.seed + len(spec.seeds))))
    if args.literal_paper_formulas:
        spec = replace(spec, literal_formulas=True)
    if args.literal_reward_sign:
        spec = replace(spec, literal_reward_sign=True)
    return spec


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_analytic(args) -> int:
    spec = _spec(args)
    model = spec.model()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["constraint", "satisfied", "slack"])
    feas = analytics.check_feasibility(model)
    for c in feas:
        w.writerow([c.name, int(c.satisfied), _fmt(c.slack)])
    w.writerow([])
    w.writerow(["scenario", "j", "inv_lambda", "edge_service", "proc_wait", "uplink_time", "downlink_time",
                "tx_wait", "delta_j", "delta"])
    if all(c.satisfied for c in feas):
        rows = analytics.aoi_breakdown(model, literal=spec.literal_formulas)
        delta = analytics.system_aoi(model, spec.slots, literal=spec.literal_formulas)
        for r in rows:
            w.writerow([spec.name, r.source, *map(_fmt, r.components()), _fmt(r.total), _fmt(delta)])
        print(f"mean per-source age {sum(r.total for r in rows) / len(rows):.6g} s; "
              f"objective (per slot) {delta:.6g} s")
    else:
        print("model infeasible: " + ", ".join(c.name for c in feas if not c.satisfied), file=sys.stderr)
    path = _write(Path(args.out) / "analytic.csv", buf.getvalue())
    print(f"wrote {path}")
    return 0 if all(c.satisfied for c in feas) else 2


def cmd_validate(args) -> int:
    spec = _spec(args)
    model = spec.model()
    seed = spec.seeds[0]
    rng = np.random.default_rng(seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "analytic", "empirical", "rel_error"])

    def row(name, a, e):
        w.writerow([name, _fmt(a), _fmt(e), _fmt(abs(e - a) / abs(a)) if a else "nan"])

    up_link, up_pkt = model.sources[0].uplink, model.raw_packet(0)
    row("uplink_time", expected_tx_time(up_link, up_pkt),
        float(np.mean(sample_tx_time(up_link, up_pkt, rng, size=args.mc_samples))))
    down_pkt = model.processed_packet(0)
    row("downlink_time", expected_tx_time(model.downlink, down_pkt),
        float(np.mean(sample_tx_time(model.downlink, down_pkt, rng, size=args.mc_samples))))
    if all(c.satisfied for c in analytics.check_feasibility(model)):
        br = analytics.aoi_breakdown(model, literal=spec.literal_formulas)
        sim = des.run(model, np.random.default_rng(seed + 1), n_packets=args.packets)
        row("proc_wait", float(np.mean([b.proc_wait for b in br])), sim.mean_proc_wait)
        row("tx_wait", float(np.mean([b.tx_wait for b in br])), sim.mean_uplink_wait)
        row("mean_aoi", float(np.mean([b.total for b in br])), sim.mean_aoi)
    path = _write(Path(args.out) / "validate.csv", buf.getvalue())
    print(buf.getvalue(), end="")
    print(f"wrote {path}")
    return 0


def cmd_train(args) -> int:
    spec = _spec(args)
    if args.episodes is not None:
        spec = replace(spec, train=replace(spec.train, episodes=args.episodes))
    cfg = replace(spec.train, steps_per_episode=spec.slots)
    model = spec.model()
    factory = env_factory(spec, model)
    seed = spec.seeds[0]
    variants = ("dueling", "plain") if args.variant == "both" else (args.variant,)
    out = Path(args.out)
    logs = {}
    for variant in variants:
        res = train(factory, cfg, variant, seed)
        logs[variant] = res.log
        out.mkdir(parents=True, exist_ok=True)
        save_params(res.params, out / f"{variant}_params.npz")
        ev = evaluate(res.params, factory, spec.eval_episodes, seed + 10_000)
        print(f"{variant}: greedy mean AoI {ev.mean_aoi:.6g} +- {ev.aoi_ci:.3g} s"
              + (f" (diverged: {res.diagnostic})" if res.diverged else ""))
    probe = factory(seed)
    rnd = evaluate(random_policy(probe.num_actions, seed), factory, spec.eval_episodes, seed + 10_000)
    print(f"random: mean AoI {rnd.mean_aoi:.6g} +- {rnd.aoi_ci:.3g} s")
    path = _write(out / CONVERGENCE_FILE, convergence_csv(logs))
    print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    spec = _spec(args)
    if args.methods:
        spec = replace(spec, methods=tuple(args.methods))
    if args.episodes is not None:
        spec = replace(spec, train=replace(spec.train, episodes=args.episodes))
    if args.sweep is None:
        sweeps = [spec.sweep]
    elif args.sweep == "all":
        sweeps = [SweepSpec.default(p) for p in SWEEP_PARAMETERS]
    else:
        sweeps = [spec.sweep if spec.sweep.parameter == args.sweep else SweepSpec.default(args.sweep)]
    results = {s.parameter: run_sweep(spec, s, workers=args.workers) for s in sweeps}
    for path in emit_report(results, args.out, spec, timing=args.timing):
        print(f"wrote {path}")
    print(summarise(results), end="")
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    found = {p: read_rows(out / f) for p, f in FIGURE_FILES.items() if (out / f).exists()}
    if not found:
        print(f"no sweep CSVs found under {out}", file=sys.stderr)
        return 1
    text = summarise(found)
    _write(out / "summary.txt", text)
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config (defaults if omitted)")
    common.add_argument("--seed", type=int, help="first seed; replaces the config seed list")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("--literal-paper-formulas", action="store_true",
                        help="use the literal per-source queue-wait formulas")
    common.add_argument("--literal-reward-sign", action="store_true",
                        help="reward = +age instead of -age")

    p = argparse.ArgumentParser(prog="edgefog-aoi", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analytic", parents=[common], help="closed-form age breakdown").set_defaults(func=cmd_analytic)
    v = sub.add_parser("validate", parents=[common], help="Monte-Carlo and simulation cross-checks")
    v.add_argument("--packets", type=int, default=200_000)
    v.add_argument("--mc-samples", type=int, default=1_000_000)
    v.set_defaults(func=cmd_validate)
    t = sub.add_parser("train", parents=[common], help="train DQN agents on the base scenario")
    t.add_argument("--variant", choices=("dueling", "plain", "both"), default="both")
    t.add_argument("--episodes", type=int)
    t.set_defaults(func=cmd_train)
    s = sub.add_parser("sweep", parents=[common], help="figure sweeps")
    s.add_argument("--sweep", choices=(*SWEEP_PARAMETERS, "all"))
    s.add_argument("--methods", nargs="+", choices=METHODS)
    s.add_argument("--episodes", type=int)
    s.add_argument("--timing", action="store_true", help="fill runtime_s (breaks byte-identical output)")
    s.set_defaults(func=cmd_sweep)
    sub.add_parser("report", parents=[common], help="summarise existing sweep CSVs").set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
