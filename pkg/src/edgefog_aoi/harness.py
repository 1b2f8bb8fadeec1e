"""Seeded sweep orchestration and CSV emission."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import analytics
from .agents import EpisodeLog, ci_half_width, evaluate, random_policy, train
from .config import ExperimentSpec, SweepSpec
from .env import EpisodeSpec, OffloadEnv

HEADER = ["sweep_value", "method", "mean_aoi", "ci_half", "seed_count", "runtime_s"]
FIGURE_FILES = {"devices": "fig6_devices.csv", "slots": "fig7_slots.csv",
                "packet": "fig8_packets.csv", "power": "fig9_power.csv"}
CONVERGENCE_FILE = "fig4_convergence.csv"
CONVERGENCE_HEADER = ["episode", "method", "cumulative_reward", "mean_loss", "mean_aoi", "epsilon"]

# expected direction of the analytic curve per sweep (+1 nondecreasing, -1 nonincreasing)
TRENDS = {"devices": ("analytic", +1), "slots": ("analytic", +1),
          "packet": ("analytic", +1), "power": ("analytic", -1)}


@dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    method: str
    mean_aoi: float
    ci_half: float
    seed_count: int
    runtime_s: float
    error: str = ""

    def __post_init__(self):
        if self.mean_aoi < 0:
            raise ValueError("mean_aoi must be >= 0")


def env_factory(spec: ExperimentSpec, model):
    episode = EpisodeSpec(horizon_slots=spec.slots, slot_s=spec.slot_s,
                          literal_reward_sign=spec.literal_reward_sign)
    return lambda seed: OffloadEnv(model, episode, seed=seed)


def _train_config(spec: ExperimentSpec):
    return replace(spec.train, steps_per_episode=spec.slots)


def run_learned(spec: ExperimentSpec, model, method: str, seed: int) -> float:
    """Mean slot-sampled age of one trained (or random) policy over the evaluation episodes."""
    factory = env_factory(spec, model)
    if method == "random":
        probe = factory(seed)
        policy = random_policy(probe.num_actions, seed)
    else:
        policy = train(factory, _train_config(spec), method, seed).params
    # evaluation seeds are offset so that training and evaluation episodes differ
    return evaluate(policy, factory, spec.eval_episodes, seed + 10_000).mean_aoi


def _task(args):
    spec, parameter, value, method, seed = args
    t0 = time.perf_counter()
    try:
        point_spec, model = spec.point(parameter, value)
        if method == "analytic":
            val = analytics.mean_source_aoi(model, literal=point_spec.literal_formulas)
        elif method == "analytic_per_slot":
            val = analytics.system_aoi(model, point_spec.slots, literal=point_spec.literal_formulas)
        else:
            val = run_learned(point_spec, model, method, seed)
        err = ""
    except Exception as exc:  # a failing point must not stop the sweep
        val, err = math.nan, f"{type(exc).__name__}: {exc}"
    return value, method, seed, val, err, time.perf_counter() - t0


def _tasks(spec: ExperimentSpec, sweep: SweepSpec):
    out = []
    for value in sweep.values:
        for method in spec.methods:
            if method == "analytic":
                out.append((spec, sweep.parameter, value, "analytic", None))
                out.append((spec, sweep.parameter, value, "analytic_per_slot", None))
                continue
            for seed in spec.seeds:
                for rep in range(spec.replications):
                    out.append((spec, sweep.parameter, value, method, seed * 1000 + rep))
    return out


def run_sweep(spec: ExperimentSpec, sweep: SweepSpec | None = None, workers: int = 1) -> list[ResultRow]:
    """Evaluate every (sweep value, method, seed) cell and aggregate over seeds."""
    sweep = sweep or spec.sweep
    if not spec.methods:
        raise ValueError("no methods to run")
    tasks = _tasks(spec, sweep)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    grouped: dict[tuple, list] = {}
    for value, method, _, val, err, dt in results:
        grouped.setdefault((value, method), []).append((val, err, dt))
    rows = []
    for (value, method), cells in grouped.items():
        vals = [v for v, e, _ in cells if not e]
        errs = sorted({e for _, e, _ in cells if e})
        mean = float(np.mean(vals)) if vals else math.nan
        rows.append(ResultRow(value, method, mean, ci_half_width(vals), len(vals),
                              sum(dt for _, _, dt in cells), "; ".join(errs)))
    return rows


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "nan" if math.isnan(x) else repr(float(x))


def header_comment(spec: ExperimentSpec, sweep: SweepSpec) -> str:
    conversions = {
        "devices": "sweep_value = number of sources",
        "slots": "sweep_value = episode length in slots",
        "packet": (f"sweep_value = offered traffic per source in kbps; packet_bits = value*1e3/lambda, "
                   f"lambda = {spec.system.arrival_bps / spec.system.packet_bits!r} packets/s"),
        "power": "sweep_value = transmit power in dBm on uplink and downlink; W = 10**((value-30)/10)",
    }
    return (f"# spec={spec.digest()} sweep={sweep.parameter} {conversions[sweep.parameter]}; "
            f"analytic = mean per-source age in s, analytic_per_slot = analytic / slots; "
            f"learned/random = mean slot-sampled age in s\n")


def rows_to_csv(rows: list[ResultRow], comment: str = "", timing: bool = False) -> str:
    buf = io.StringIO()
    buf.write(comment)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow([_fmt(r.sweep_value), r.method, _fmt(r.mean_aoi), _fmt(r.ci_half), r.seed_count,
                    f"{r.runtime_s:.3f}" if timing else ""])
    return buf.getvalue()


def read_rows(path) -> list[ResultRow]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames != HEADER:
        raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
    return [ResultRow(float(r["sweep_value"]), r["method"], float(r["mean_aoi"]), float(r["ci_half"]),
                      int(r["seed_count"]), float(r["runtime_s"]) if r["runtime_s"] else math.nan)
            for r in reader]


def trend_violations(rows: list[ResultRow], method: str, direction: int) -> list[tuple[float, float]]:
    """Consecutive sweep points where ``method`` moves against ``direction``."""
    pts = sorted((r.sweep_value, r.mean_aoi) for r in rows if r.method == method and not math.isnan(r.mean_aoi))
    return [(a[0], b[0]) for a, b in zip(pts, pts[1:]) if direction * (b[1] - a[1]) < 0]


def summarise(rows_by_sweep: dict[str, list[ResultRow]]) -> str:
    lines = []
    for parameter, rows in sorted(rows_by_sweep.items()):
        method, direction = TRENDS[parameter]
        bad = trend_violations(rows, method, direction)
        word = "nondecreasing" if direction > 0 else "nonincreasing"
        lines.append(f"{parameter}: {method} {word}: {'ok' if not bad else f'violated at {bad}'}")
        by_value: dict[float, dict[str, float]] = {}
        for r in rows:
            by_value.setdefault(r.sweep_value, {})[r.method] = r.mean_aoi
        pairs = [(v, m["dueling"], m["plain"]) for v, m in sorted(by_value.items())
                 if "dueling" in m and "plain" in m]
        if pairs:
            held = sum(d <= p for _, d, p in pairs)
            lines.append(f"{parameter}: dueling <= plain at {held}/{len(pairs)} points")
        failed = [r for r in rows if r.error]
        for r in failed:
            lines.append(f"{parameter}: {r.method} at {r.sweep_value!r} failed: {r.error}")
    return "\n".join(lines) + "\n"


def emit_report(rows_by_sweep: dict[str, list[ResultRow]], out_dir, spec: ExperimentSpec,
                timing: bool = False) -> list[Path]:
    """Write one CSV per sweep plus ``summary.txt``; returns written paths."""
    if not rows_by_sweep or not any(rows_by_sweep.values()):
        raise ValueError("no result rows to report")
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for parameter, rows in rows_by_sweep.items():
            path = out / FIGURE_FILES[parameter]
            sweep = SweepSpec(parameter, sorted({r.sweep_value for r in rows}))
            path.write_text(rows_to_csv(rows, header_comment(spec, sweep), timing))
            written.append(path)
        path = out / "summary.txt"
        path.write_text(summarise(rows_by_sweep))
        written.append(path)
    except OSError as exc:
        raise OSError(f"failed writing report under {out}: {exc}") from exc
    return written


def convergence_csv(logs: dict[str, list[EpisodeLog]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CONVERGENCE_HEADER)
    for method, log in logs.items():
        for e in log:
            w.writerow([e.episode, method, _fmt(e.cumulative_reward), _fmt(e.mean_loss),
                        _fmt(e.mean_aoi), _fmt(e.epsilon)])
    return buf.getvalue()
