"""System description shared by the analytics, the simulator and the environment."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .channel import ChannelParams, PacketSpec


class InfeasibleError(ValueError):
    """A stability or positivity constraint of the system is violated."""

    def __init__(self, constraint: str, detail: str):
        super().__init__(f"constraint '{constraint}' violated: {detail}")
        self.constraint = constraint


@dataclass(frozen=True)
class Source:
    arrival_rate: float     # packets/s
    packet_bits: float      # size of the raw update
    uplink: ChannelParams

    def __post_init__(self):
        if not (math.isfinite(self.arrival_rate) and self.arrival_rate >= 0):
            raise ValueError(f"arrival_rate must be finite and >= 0, got {self.arrival_rate!r}")
        PacketSpec(self.packet_bits)


@dataclass(frozen=True)
class SystemModel:
    """IoT sources -> one edge server (monitor) -> one vehicular fog node.

    Construction only checks that quantities are well formed; stability
    (utilisation below one) is reported by :func:`analytics.check_feasibility`
    so that unstable systems can still be simulated.
    """

    sources: tuple[Source, ...]
    edge_capacity: float            # services/s at the edge server
    fog_capacity: float             # services/s at the fog node (not part of the age formula)
    downlink: ChannelParams
    processed_ratio: float = 0.2    # processed size / raw size

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if not self.sources:
            raise ValueError("at least one source is required")
        for name in ("edge_capacity", "fog_capacity"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if not (0 < self.processed_ratio <= 1):
            raise ValueError(f"processed_ratio must lie in (0, 1], got {self.processed_ratio!r}")

    @property
    def num_sources(self) -> int:
        return len(self.sources)

    @property
    def arrival_rates(self) -> list[float]:
        return [s.arrival_rate for s in self.sources]

    @property
    def utilisations(self) -> list[float]:
        return [s.arrival_rate / self.edge_capacity for s in self.sources]

    @property
    def utilisation(self) -> float:
        return sum(self.utilisations)

    def raw_packet(self, j: int) -> PacketSpec:
        return PacketSpec(self.sources[j].packet_bits)

    def processed_packet(self, j: int) -> PacketSpec:
        return PacketSpec(self.processed_ratio * self.sources[j].packet_bits)

    def with_arrival_rates(self, rates) -> "SystemModel":
        rates = list(rates)
        if len(rates) != self.num_sources:
            raise ValueError("one rate per source required")
        return replace(self, sources=tuple(replace(s, arrival_rate=r) for s, r in zip(self.sources, rates)))


def symmetric_model(num_sources: int, arrival_rate: float, packet_bits: float,
                    edge_capacity: float, fog_capacity: float,
                    uplink: ChannelParams, downlink: ChannelParams,
                    processed_ratio: float = 0.2) -> SystemModel:
    src = Source(arrival_rate, packet_bits, uplink)
    return SystemModel((src,) * num_sources, edge_capacity, fog_capacity, downlink, processed_ratio)
