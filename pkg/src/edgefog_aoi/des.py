"""Event-driven simulation of the uplink -> edge processing -> downlink pipeline.

Sources generate Poisson updates. All sources share one FCFS uplink channel;
the edge server processes one packet at a time (FCFS); a processed packet is
sent to the fog over the downlink as soon as processing ends. Downlink
transfers do not queue behind each other and may overlap uplink transfers
(they use a separate channel), so a packet can overtake an older one of the
same source; such stale deliveries do not reset the age.
"""

from __future__ import annotations

import heapq
import math
import warnings
from array import array
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .channel import TxTimeStream
from .model import SystemModel

ARRIVAL, UPLINK_DONE, PROC_DONE, DELIVERY = range(4)
SERVICE_LAWS = ("deterministic", "exponential", "zero")


class UndefinedAgeError(ValueError):
    pass


@dataclass(frozen=True)
class PacketRecord:
    source: int
    generated: float
    uplink_start: float
    uplink_end: float
    proc_start: float
    proc_end: float
    delivered: float

    @property
    def system_time(self) -> float:
        return self.delivered - self.generated


@dataclass
class AgeTrace:
    """Saw-tooth age of one source at the destination over ``[t_start, t_end]``.

    The age is ``age_start`` at ``t_start``, grows with slope one and drops to
    ``system_times[i]`` at ``delivery_times[i]``.
    """

    source: int
    t_start: float
    age_start: float
    delivery_times: np.ndarray
    system_times: np.ndarray
    t_end: float

    def __post_init__(self):
        self.delivery_times = np.asarray(self.delivery_times, dtype=float)
        self.system_times = np.asarray(self.system_times, dtype=float)
        if self.delivery_times.shape != self.system_times.shape:
            raise ValueError("delivery_times and system_times must have equal length")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        d = self.delivery_times
        if d.size and (np.any(np.diff(d) <= 0) or d[0] < self.t_start or d[-1] > self.t_end):
            raise ValueError("delivery times must be strictly increasing inside [t_start, t_end]")
        if np.any(self.system_times < 0) or self.age_start < 0:
            raise ValueError("ages must be nonnegative")

    def age_at(self, t):
        """Age at time(s) ``t`` (right-continuous at deliveries)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.delivery_times, t, side="right") - 1
        base_t = np.where(idx >= 0, self.delivery_times[np.maximum(idx, 0)], self.t_start)
        base_a = np.where(idx >= 0, self.system_times[np.maximum(idx, 0)], self.age_start)
        return base_a + (t - base_t)


def update_areas(trace: AgeTrace) -> np.ndarray:
    """Trapezoid area ``Q_i = (R_i + K_i)^2/2 - K_i^2/2`` for each delivery.

    ``R_i`` is the gap between the generation instants of consecutive
    delivered updates and ``K_i`` the system time of update ``i``; the state at
    ``t_start`` acts as update 0 with system time ``age_start``.
    """
    K = np.concatenate(([trace.age_start], trace.system_times))
    d = np.concatenate(([trace.t_start], trace.delivery_times))
    R = np.diff(d - K)
    return 0.5 * (R + K[1:]) ** 2 - 0.5 * K[1:] ** 2


def time_average_age(trace: AgeTrace) -> float:
    """Area under the saw-tooth divided by the observation length.

    Sum of :func:`update_areas` plus the boundary pieces: the triangle
    already accumulated before ``t_start`` is removed and the growth after
    the last delivery is added.
    """
    if len(trace.delivery_times) == 0:
        raise UndefinedAgeError(f"source {trace.source}: no deliveries in the observation window")
    k0, kn = trace.age_start, trace.system_times[-1]
    tail = trace.t_end - trace.delivery_times[-1]
    boundary = 0.5 * kn ** 2 - 0.5 * k0 ** 2 + kn * tail + 0.5 * tail ** 2
    return float((update_areas(trace).sum() + boundary) / (trace.t_end - trace.t_start))


def piecewise_age_area(trace: AgeTrace) -> float:
    """Direct segment-by-segment integral of the age curve (reference form)."""
    area = 0.0
    t, a = trace.t_start, trace.age_start
    for td, k in zip(trace.delivery_times, trace.system_times):
        L = td - t
        area += a * L + 0.5 * L * L
        t, a = td, k
    L = trace.t_end - t
    return area + a * L + 0.5 * L * L


@dataclass
class SimResult:
    traces: dict[int, AgeTrace]
    t_start: float
    t_end: float
    mean_uplink_wait: float
    mean_uplink_time: float
    mean_proc_wait: float
    mean_downlink_time: float
    mean_system_time: float
    mean_uplink_queue_len: float
    mean_proc_queue_len: float
    arrival_rate_observed: float
    packets_generated: int
    packets_observed: int
    per_source_aoi: dict[int, float]
    per_source: dict[int, dict[str, float]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def mean_aoi(self) -> float:
        vals = list(self.per_source_aoi.values())
        return float(np.mean(vals)) if vals else math.nan


class TandemSimulator:
    """Incremental tandem simulator.

    With ``auto_downlink=False`` processed packets are held at the edge (only
    the freshest per source is kept) and :meth:`offload` sends them; this is
    the mode used by the slot-based environment.
    """

    def __init__(self, model: SystemModel, rng: np.random.Generator, service_law: str = "deterministic",
                 zero_transmission: bool = False, auto_downlink: bool = True,
                 max_packets: int | None = None, check_invariants: bool = False):
        if service_law not in SERVICE_LAWS:
            raise ValueError(f"service_law must be one of {SERVICE_LAWS}")
        self.model = model
        self.service_law = service_law
        self.zero_tx = zero_transmission
        self.auto_downlink = auto_downlink
        self.max_packets = max_packets
        self.check_invariants = check_invariants
        J = model.num_sources
        streams = rng.spawn(3 * J + 1)
        self._arrival_rngs = streams[:J]
        self._service_rng = streams[J]
        self._up = [TxTimeStream(s.uplink, model.raw_packet(j), streams[J + 1 + j]) for j, s in enumerate(model.sources)]
        self._down = [TxTimeStream(model.downlink, model.processed_packet(j), streams[2 * J + 1 + j])
                      for j in range(J)]

        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.src = array("i")
        self.gen = array("d")
        self.up_start = array("d")
        self.up_end = array("d")
        self.proc_start = array("d")
        self.proc_end = array("d")
        self.deliv = array("d")

        self.up_queue: deque = deque()
        self.up_busy = -1
        self.proc_queue: deque = deque()
        self.proc_busy = -1
        self.in_downlink = 0
        self.ready: dict[int, int] = {}        # source -> freshest processed packet held at edge
        self.superseded = 0
        self.delivered = 0
        self.arrivals_open = True

        # destination state per source
        self.last_gen = [0.0] * J              # generation time of freshest delivered update
        self.fresh: list[list[tuple[float, float]]] = [[] for _ in range(J)]   # (delivery, system time)
        self.last_uplink_time = [math.nan] * J   # most recent realised transfer durations
        self.last_downlink_time = math.nan

        for j, s in enumerate(model.sources):
            if s.arrival_rate > 0:
                self._push(self._arrival_rngs[j].exponential(1.0 / s.arrival_rate), ARRIVAL, j)

    # -- event plumbing -------------------------------------------------
    def _push(self, t, kind, payload):
        heapq.heappush(self._heap, (t, self._seq, kind, payload))
        self._seq += 1

    def _service_time(self):
        if self.service_law == "deterministic":
            return 1.0 / self.model.edge_capacity
        if self.service_law == "exponential":
            return self._service_rng.exponential(1.0 / self.model.edge_capacity)
        return 0.0

    @property
    def generated(self) -> int:
        return len(self.gen)

    def in_system(self) -> int:
        return (len(self.up_queue) + len(self.proc_queue) + (self.up_busy >= 0) + (self.proc_busy >= 0)
                + self.in_downlink + len(self.ready))

    def _check(self):
        if self.generated != self.delivered + self.superseded + self.in_system():
            raise AssertionError("packet conservation violated")

    def _record_delivery(self, pid, t):
        self.deliv[pid] = t
        self.delivered += 1
        j = self.src[pid]
        g = self.gen[pid]
        if g > self.last_gen[j]:
            self.last_gen[j] = g
            self.fresh[j].append((t, t - g))

    def _start_downlink(self, pid, t):
        dt = 0.0 if self.zero_tx else self._down[self.src[pid]].next()
        self.in_downlink += 1
        self._push(t + dt, DELIVERY, pid)

    def advance_to(self, t_limit: float) -> None:
        """Process every event with time <= ``t_limit`` and move the clock there."""
        heap = self._heap
        while heap and heap[0][0] <= t_limit:
            t, _, kind, payload = heapq.heappop(heap)
            self.now = t
            if kind == ARRIVAL:
                if not self.arrivals_open:
                    continue            # already-scheduled arrivals past the packet cap
                j = payload
                pid = len(self.gen)
                self.src.append(j)
                self.gen.append(t)
                for col in (self.up_start, self.up_end, self.proc_start, self.proc_end, self.deliv):
                    col.append(math.nan)
                if self.up_busy < 0:
                    self.up_busy = pid
                    self.up_start[pid] = t
                    dt = 0.0 if self.zero_tx else self._up[j].next()
                    self.last_uplink_time[j] = dt
                    self._push(t + dt, UPLINK_DONE, pid)
                else:
                    self.up_queue.append(pid)
                if self.max_packets is not None and len(self.gen) >= self.max_packets:
                    self.arrivals_open = False
                if self.arrivals_open:
                    rate = self.model.sources[j].arrival_rate
                    self._push(t + self._arrival_rngs[j].exponential(1.0 / rate), ARRIVAL, j)
            elif kind == UPLINK_DONE:
                pid = payload
                self.up_end[pid] = t
                if self.up_queue:
                    nxt = self.up_queue.popleft()
                    self.up_busy = nxt
                    self.up_start[nxt] = t
                    jn = self.src[nxt]
                    dt = 0.0 if self.zero_tx else self._up[jn].next()
                    self.last_uplink_time[jn] = dt
                    self._push(t + dt, UPLINK_DONE, nxt)
                else:
                    self.up_busy = -1
                if self.proc_busy < 0:
                    self.proc_busy = pid
                    self.proc_start[pid] = t
                    self._push(t + self._service_time(), PROC_DONE, pid)
                else:
                    self.proc_queue.append(pid)
            elif kind == PROC_DONE:
                pid = payload
                self.proc_end[pid] = t
                if self.proc_queue:
                    nxt = self.proc_queue.popleft()
                    self.proc_busy = nxt
                    self.proc_start[nxt] = t
                    self._push(t + self._service_time(), PROC_DONE, nxt)
                else:
                    self.proc_busy = -1
                if self.auto_downlink:
                    self._start_downlink(pid, t)
                else:
                    j = self.src[pid]
                    if j in self.ready:
                        self.superseded += 1
                    self.ready[j] = pid
            else:
                self.in_downlink -= 1
                self._record_delivery(payload, t)
            if self.check_invariants:
                self._check()
        if t_limit > self.now:
            self.now = t_limit

    def stop_arrivals(self) -> None:
        self.arrivals_open = False
        self._heap = [e for e in self._heap if e[2] != ARRIVAL]
        heapq.heapify(self._heap)

    def drain(self) -> None:
        self.advance_to(math.inf)

    # -- environment hooks ---------------------------------------------
    def freshest_ready(self, j: int) -> int | None:
        return self.ready.get(j)

    def offload(self, j: int) -> tuple[float, float] | None:
        """Send the freshest held update of source ``j`` to the fog now.

        Returns ``(downlink_time, generation_time)`` or ``None`` if nothing is held.
        The delivery is booked immediately at ``now + downlink_time``.
        """
        pid = self.ready.pop(j, None)
        if pid is None:
            return None
        dt = 0.0 if self.zero_tx else self._down[j].next()
        self.last_downlink_time = dt
        t = self.now + dt
        self.deliv[pid] = t
        self.delivered += 1
        return dt, self.gen[pid]

    def packet(self, pid: int) -> PacketRecord:
        return PacketRecord(self.src[pid], self.gen[pid], self.up_start[pid], self.up_end[pid],
                            self.proc_start[pid], self.proc_end[pid], self.deliv[pid])


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else math.nan


def run(m: SystemModel, rng: np.random.Generator, *, horizon_s: float | None = None,
        n_packets: int | None = None, service_law: str = "deterministic",
        zero_transmission: bool = False, warmup_frac: float = 0.05,
        check_invariants: bool = False) -> SimResult:
    """Simulate until ``horizon_s`` seconds or ``n_packets`` generated packets.

    Arrivals stop at the horizon and the pipeline drains so that every packet
    in the observation window ``[warmup_frac * t_stop, t_stop]`` has complete
    timestamps. Statistics cover packets generated inside that window; ages
    are integrated over it.
    """
    if (horizon_s is None) == (n_packets is None):
        raise ValueError("give exactly one of horizon_s or n_packets")
    if not 0 <= warmup_frac < 1:
        raise ValueError("warmup_frac must lie in [0, 1)")
    sim = TandemSimulator(m, rng, service_law, zero_transmission, auto_downlink=True,
                          max_packets=n_packets, check_invariants=check_invariants)
    if horizon_s is not None:
        sim.advance_to(horizon_s)
        sim.stop_arrivals()
        t_stop = horizon_s
    else:
        sim.drain()         # arrivals close themselves after n_packets
        t_stop = sim.gen[-1] if len(sim.gen) else 0.0
    t_w = warmup_frac * t_stop
    sim.drain()
    return _summarise(sim, t_w, t_stop)


def _summarise(sim: TandemSimulator, t_w: float, t_stop: float) -> SimResult:
    m = sim.model
    gen = np.frombuffer(sim.gen, dtype=float)
    src = np.frombuffer(sim.src, dtype=np.int32)
    ups = np.frombuffer(sim.up_start, dtype=float)
    upe = np.frombuffer(sim.up_end, dtype=float)
    prs = np.frombuffer(sim.proc_start, dtype=float)
    pre = np.frombuffer(sim.proc_end, dtype=float)
    dlv = np.frombuffer(sim.deliv, dtype=float)
    sel = (gen >= t_w) & (gen <= t_stop)
    width = t_stop - t_w
    notes = []

    up_wait = ups[sel] - gen[sel]
    proc_wait = prs[sel] - upe[sel]
    per_source = {}
    traces, aoi = {}, {}
    for j in range(m.num_sources):
        sj = sel & (src == j)
        per_source[j] = {
            "uplink_wait": _mean(ups[sj] - gen[sj]),
            "uplink_time": _mean(upe[sj] - ups[sj]),
            "proc_wait": _mean(prs[sj] - upe[sj]),
            "downlink_time": _mean(dlv[sj] - pre[sj]),
            "system_time": _mean(dlv[sj] - gen[sj]),
        }
        fresh = sim.fresh[j]
        times = np.array([f[0] for f in fresh])
        ks = np.array([f[1] for f in fresh])
        before = times < t_w
        if before.any():
            i = np.nonzero(before)[0][-1]
            age0 = t_w - (times[i] - ks[i])
        else:
            age0 = t_w      # age starts at zero at time zero
        inside = (times >= t_w) & (times <= t_stop)
        if width > 0:
            traces[j] = AgeTrace(j, t_w, age0, times[inside], ks[inside], t_stop)
        if inside.sum() < 2:
            notes.append(f"source {j}: {int(inside.sum())} deliveries in the window; age estimate under-sampled")
            aoi[j] = math.nan
        else:
            aoi[j] = time_average_age(traces[j])
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=3)

    up_area, proc_area = _window_queue_areas(gen, ups, upe, prs, t_w, t_stop)
    return SimResult(
        traces=traces, t_start=t_w, t_end=t_stop,
        mean_uplink_wait=_mean(up_wait),
        mean_uplink_time=_mean(upe[sel] - ups[sel]),
        mean_proc_wait=_mean(proc_wait),
        mean_downlink_time=_mean(dlv[sel] - pre[sel]),
        mean_system_time=_mean(dlv[sel] - gen[sel]),
        mean_uplink_queue_len=up_area / width if width > 0 else math.nan,
        mean_proc_queue_len=proc_area / width if width > 0 else math.nan,
        arrival_rate_observed=sel.sum() / width if width > 0 else math.nan,
        packets_generated=len(gen),
        packets_observed=int(sel.sum()),
        per_source_aoi=aoi,
        per_source=per_source,
        warnings=notes,
    )


def _window_queue_areas(gen, ups, upe, prs, t_w, t_stop):
    """Time-integral of the waiting-room occupancy of each queue over ``[t_w, t_stop]``.

    A packet occupies the uplink waiting room on ``[gen, uplink_start)`` and the
    processing waiting room on ``[uplink_end, proc_start)``; overlap with the
    window is summed over all packets (including those generated before it).
    """
    def overlap(a, b):
        return np.clip(np.minimum(b, t_stop) - np.maximum(a, t_w), 0.0, None).sum()
    return float(overlap(gen, ups)), float(overlap(upe, prs))


def dump_trace_csv(result: SimResult, path) -> None:
    """Write ``delivery_time,system_time,source`` rows for plotting saw-tooth curves."""
    with open(path, "w", newline="") as fh:
        fh.write("delivery_time,system_time,source\n")
        for j, tr in sorted(result.traces.items()):
            for t, k in zip(tr.delivery_times, tr.system_times):
                fh.write(f"{t!r},{k!r},{j}\n")
