"""Slotted offloading environment on top of the tandem simulator.

Each step covers one slot of ``slot_s`` seconds. Updates keep flowing through
the uplink and the edge server in continuous time; processed updates wait at
the edge until the agent decides to offload. At the end of a slot with the
offload bit set, the freshest held update of each source is sent to the fog
and that source's destination age drops to the update's system time
(generation to fog arrival, including the sampled downlink transfer).
Otherwise the age grows by one slot.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import shannon_rate
from .des import TandemSimulator
from .model import SystemModel


class EpisodeFinishedError(RuntimeError):
    pass


@dataclass(frozen=True)
class StateScales:
    """Divisors applied to each state field before it reaches the network."""
    arrival: float
    capacity: float
    rate: float
    age: float

    def __post_init__(self):
        for k in ("arrival", "capacity", "rate", "age"):
            v = getattr(self, k)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"scale '{k}' must be finite and > 0")


@dataclass(frozen=True)
class EpisodeSpec:
    horizon_slots: int = 10
    slot_s: float = 1.0
    literal_reward_sign: bool = False     # +age instead of -age
    per_source_actions: bool = False      # 2**J actions instead of one shared offload bit
    service_law: str = "deterministic"
    zero_transmission: bool = False
    scales: StateScales | None = None     # None: derived from the model

    def __post_init__(self):
        if int(self.horizon_slots) != self.horizon_slots or self.horizon_slots < 1:
            raise ValueError("horizon_slots must be a positive integer")
        if not (math.isfinite(self.slot_s) and self.slot_s > 0):
            raise ValueError("slot_s must be finite and > 0")


@dataclass
class StepOutcome:
    state: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def default_scales(m: SystemModel, spec: EpisodeSpec) -> StateScales:
    return StateScales(
        arrival=max(m.arrival_rates) or 1.0,
        capacity=max(m.edge_capacity, m.fog_capacity),
        rate=max(shannon_rate(s.uplink, 1.0) for s in m.sources),
        age=spec.horizon_slots * spec.slot_s,
    )


class OffloadEnv:
    def __init__(self, model: SystemModel, spec: EpisodeSpec = EpisodeSpec(), seed: int | None = None,
                 record: bool = False):
        J = model.num_sources
        if spec.per_source_actions and J > 10:
            raise ValueError("per-source action set supports at most 10 sources")
        self.model = model
        self.spec = spec
        self.scales = spec.scales or default_scales(model, spec)
        self.record = record
        self._seed_seq = np.random.SeedSequence(seed)
        self.sim: TandemSimulator | None = None
        self.t = 0
        self.ages = np.zeros(J)
        self.done = True
        self.trace: list[dict] = []
        self.down_rate: float | None = None

    # -- spaces ---------------------------------------------------------
    @property
    def num_actions(self) -> int:
        return 2 ** self.model.num_sources if self.spec.per_source_actions else 2

    @property
    def state_dim(self) -> int:
        J = self.model.num_sources
        return J + (J + 1) + (J + 1) + J

    def decode_action(self, action: int) -> np.ndarray:
        """Offload bit per source."""
        if not (0 <= action < self.num_actions) or int(action) != action:
            raise ValueError(f"action must be an integer in [0, {self.num_actions}), got {action!r}")
        J = self.model.num_sources
        if self.spec.per_source_actions:
            return np.array([(action >> j) & 1 for j in range(J)], dtype=np.int8)
        return np.full(J, action, dtype=np.int8)

    # -- episode --------------------------------------------------------
    def reset(self, seed: int | None = None) -> np.ndarray:
        ss = np.random.SeedSequence(seed) if seed is not None else self._seed_seq.spawn(1)[0]
        rng = np.random.default_rng(ss)
        self.sim = TandemSimulator(self.model, rng, self.spec.service_law, self.spec.zero_transmission,
                                   auto_downlink=False)
        self.t = 0
        self.ages = np.zeros(self.model.num_sources)
        self.done = False
        self.trace = []
        self.down_rate = None
        return self._state()

    def _state(self) -> np.ndarray:
        m, sc, sim = self.model, self.scales, self.sim
        J = m.num_sources
        up = np.empty(J)
        for j, s in enumerate(m.sources):
            dt = sim.last_uplink_time[j]
            # before the first transfer report the unit-gain rate
            up[j] = m.raw_packet(j).size_bits / dt if dt > 0 else shannon_rate(s.uplink, 1.0)
        down = self.down_rate if self.down_rate is not None else shannon_rate(m.downlink, 1.0)
        parts = [
            np.asarray(m.arrival_rates) / sc.arrival,
            np.append(np.full(J, m.edge_capacity), m.fog_capacity) / sc.capacity,
            np.append(up, down) / sc.rate,
            self.ages / sc.age,
        ]
        return np.concatenate(parts)

    def step(self, action: int) -> StepOutcome:
        if self.done or self.sim is None:
            raise EpisodeFinishedError("episode finished; call reset()")
        bits = self.decode_action(action)
        tau = self.spec.slot_s
        t_end = (self.t + 1) * tau
        self.sim.advance_to(t_end)
        delivered = []
        new_ages = self.ages + tau
        for j in np.flatnonzero(bits):
            sent = self.sim.offload(int(j))
            if sent is None:
                continue            # nothing processed yet: offloading is a no-op
            dt, gen = sent
            if dt > 0:
                self.down_rate = self.model.processed_packet(int(j)).size_bits / dt
            k = t_end + dt - gen
            if k < new_ages[j]:
                new_ages[j] = k
                delivered.append(int(j))
        self.ages = new_ages
        self.t += 1
        self.done = self.t >= self.spec.horizon_slots
        J, T = self.model.num_sources, self.spec.horizon_slots
        total_age = float(self.ages.sum())
        reward = total_age / (J * T)
        if not self.spec.literal_reward_sign:
            reward = -reward
        info = {"slot": self.t, "ages": self.ages.tolist(), "mean_age": total_age / J,
                "delivered": delivered, "offload": bits.tolist()}
        if self.record:
            self.trace.append({"action": int(action), "reward": reward, **info})
        return StepOutcome(self._state(), reward, self.done, info)

    # -- utilities ------------------------------------------------------
    def snapshot(self) -> "OffloadEnv":
        return copy.deepcopy(self)

    def dump_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.trace:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
