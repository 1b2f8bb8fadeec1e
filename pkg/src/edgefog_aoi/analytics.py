"""Closed-form end-to-end age decomposition for the edge/fog tandem.

Per source ``j`` the average age is the sum of six terms::

    1/lambda_j + 1/mu_A + E[L^P_j] + E[I^T_j] + E[V^T_j] + E[L^T_j]

(inter-arrival, edge service, processing-queue wait, uplink time, downlink
time, transmission-queue wait). The queue waits have two forms: the
derivation-consistent one (default) and a literal variant with per-source
index sets (``literal=True``), kept for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .channel import expected_tx_time
from .model import InfeasibleError, SystemModel
from .quadrature import QuadratureSettings

DEFAULT_QUAD = QuadratureSettings()

PROCESSING = "processing_stability"
UPLINK = "uplink_stability"
DOWNLINK = "downlink_stability"
POSITIVE = "positive_arrivals"


@dataclass(frozen=True)
class Constraint:
    name: str
    satisfied: bool
    slack: float


@dataclass(frozen=True)
class AoiBreakdown:
    source: int
    inv_lambda: float
    edge_service: float
    proc_wait: float
    uplink_time: float
    downlink_time: float
    tx_wait: float

    @property
    def total(self) -> float:
        return (self.inv_lambda + self.edge_service + self.proc_wait
                + self.uplink_time + self.downlink_time + self.tx_wait)

    def components(self) -> tuple[float, ...]:
        return tuple(getattr(self, f.name) for f in fields(self)[1:])


def uplink_times(m: SystemModel, quad: QuadratureSettings = DEFAULT_QUAD) -> list[float]:
    return [expected_tx_time(s.uplink, m.raw_packet(j), quad) for j, s in enumerate(m.sources)]


def downlink_times(m: SystemModel, quad: QuadratureSettings = DEFAULT_QUAD) -> list[float]:
    return [expected_tx_time(m.downlink, m.processed_packet(j), quad) for j in range(m.num_sources)]


def check_feasibility(m: SystemModel, quad: QuadratureSettings = DEFAULT_QUAD) -> list[Constraint]:
    """Evaluate every stability/positivity constraint; never raises.

    Slack is ``1 - load`` for the three utilisation constraints and the
    smallest arrival rate for the positivity constraint.
    """
    lam = m.arrival_rates
    loads = {
        PROCESSING: sum(l / m.edge_capacity for l in lam),
        UPLINK: sum(l * t for l, t in zip(lam, uplink_times(m, quad))),
        DOWNLINK: sum(l * t for l, t in zip(lam, downlink_times(m, quad))),
    }
    out = [Constraint(name, load < 1.0, 1.0 - load) for name, load in loads.items()]
    out.append(Constraint(POSITIVE, min(lam) > 0, min(lam)))
    return out


def require_feasible(m: SystemModel, quad: QuadratureSettings = DEFAULT_QUAD) -> None:
    for c in check_feasibility(m, quad):
        if not c.satisfied:
            raise InfeasibleError(c.name, f"slack {c.slack!r}")


def busy_probability(m: SystemModel) -> float:
    """Fraction of time the edge server is busy (sum of per-source utilisations)."""
    p = m.utilisation
    if p >= 1.0:
        raise InfeasibleError(PROCESSING, f"edge utilisation {p!r} >= 1")
    return p


def residual_service_time(m: SystemModel) -> float:
    """Mean remaining edge service seen by an arrival finding the server busy.

    E[A^2] / (2 E[A]) with the per-class moments weighted by arrival share;
    deterministic service gives ``rho_j^2 / lambda_j = rho_j / mu``.
    """
    busy_probability(m)
    rho = m.utilisations
    total = sum(rho)
    if total <= 0:
        raise InfeasibleError(POSITIVE, "all arrival rates are zero")
    service = 1.0 / m.edge_capacity
    second = sum(r * service for r in rho)     # sum_j rho_j^2 / lambda_j
    return second / (2.0 * total)


def processing_queue_wait(m: SystemModel, j: int, literal: bool = False) -> float:
    """Mean wait in the edge processing queue for packets of source ``j``."""
    if not 0 <= j < m.num_sources:
        raise IndexError(j)
    rho = m.utilisations
    J = m.num_sources
    if literal:
        busy_probability(m)
        second = sum(r / m.edge_capacity for r in rho)
        others = sum(r for i, r in enumerate(rho) if i != j)
        beta = 1.0 if J > 1 else 0.0
        others_head = sum(r for i, r in enumerate(rho[: J - 1]) if i != j)
        den = 2.0 * (1.0 - others) * (1.0 - beta * others_head)
    else:
        second = busy_probability(m) * residual_service_time(m)
        if J == 1:
            den = 1.0 - rho[0]
        else:
            den = (1.0 - sum(rho)) * (1.0 - sum(rho[: J - 1]))
    if den <= 0:
        raise InfeasibleError(PROCESSING, f"load-correction denominator {den!r} <= 0")
    return second / den


def transmission_queue_wait(m: SystemModel, uplink: list[float], j: int, literal: bool = False) -> float:
    """Mean wait in the shared uplink queue, via a maximum-entropy busy-period count.

    The number of packets served in a busy period is given the geometric
    maximum-entropy law ``Pr(X = x) ~ exp(-alpha x)``; matching ``Pr(X = 0)``
    to the idle probability ``1 - rho_T`` fixes ``alpha`` and the mean count,
    and Little's law turns that into a wait.
    """
    if not 0 <= j < m.num_sources:
        raise IndexError(j)
    lam = m.arrival_rates
    total_rate = sum(lam)
    rho_t = sum(l * t for l, t in zip(lam, uplink))
    if rho_t >= 1.0:
        raise InfeasibleError(UPLINK, f"uplink utilisation {rho_t!r} >= 1")
    if literal:
        others = sum(l for i, l in enumerate(lam) if i != j)
        if others <= 0:
            raise ValueError("literal transmission-wait form is undefined with a single active source")
        load_others = sum(l * uplink[j] for i, l in enumerate(lam) if i != j)
        return rho_t ** 2 / (others * (1.0 - load_others))
    if total_rate <= 0:
        raise InfeasibleError(POSITIVE, "all arrival rates are zero")
    if rho_t == 0:
        return 0.0
    alpha = -math.log(rho_t)                 # exp(-alpha) = rho_T
    q = math.exp(-alpha)
    mean_count = q / (1.0 - q)               # d/d(alpha) of -ln(1 - exp(-alpha))
    mean_tx = rho_t / total_rate             # arrival-weighted uplink time
    return mean_count / total_rate - mean_tx


def aoi_per_source(m: SystemModel, j: int, quad: QuadratureSettings = DEFAULT_QUAD,
                   literal: bool = False) -> AoiBreakdown:
    require_feasible(m, quad)
    up = uplink_times(m, quad)
    down = downlink_times(m, quad)
    return AoiBreakdown(
        source=j,
        inv_lambda=1.0 / m.sources[j].arrival_rate,
        edge_service=1.0 / m.edge_capacity,
        proc_wait=processing_queue_wait(m, j, literal),
        uplink_time=up[j],
        downlink_time=down[j],
        tx_wait=transmission_queue_wait(m, up, j, literal),
    )


def aoi_breakdown(m: SystemModel, quad: QuadratureSettings = DEFAULT_QUAD,
                  literal: bool = False) -> list[AoiBreakdown]:
    return [aoi_per_source(m, j, quad, literal) for j in range(m.num_sources)]


def mean_source_aoi(m: SystemModel, quad: QuadratureSettings = DEFAULT_QUAD, literal: bool = False) -> float:
    """Average of the per-source ages (no division by the slot count)."""
    rows = aoi_breakdown(m, quad, literal)
    return sum(r.total for r in rows) / len(rows)


def system_aoi(m: SystemModel, horizon_slots: int, quad: QuadratureSettings = DEFAULT_QUAD,
               literal: bool = False) -> float:
    """Objective value: sum of per-source ages divided by ``T * J``."""
    if int(horizon_slots) != horizon_slots or horizon_slots < 1:
        raise ValueError("horizon_slots must be a positive integer")
    return mean_source_aoi(m, quad, literal) / horizon_slots
