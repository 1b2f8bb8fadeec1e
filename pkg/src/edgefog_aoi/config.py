"""JSON experiment configuration with explicit physical units.

Every physical quantity is written as ``"<number> <unit>"`` (e.g. ``"3 km"``,
``"-174 dBm/Hz"``); a bare number for a physical key is rejected. Values are
normalised to SI on load and written back in SI on dump, so a load/dump/load
cycle returns an equal spec.

Arrival traffic is given per source as an offered bit rate; the packet rate
is ``arrival / packet_size``. Server capacities are bit rates as well and
become service rates ``capacity / packet_size`` (raw packets at the edge,
processed packets at the fog).
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .agents import TrainConfig
from .channel import ChannelParams
from .model import SystemModel, symmetric_model


class ConfigError(ValueError):
    pass


# unit -> (dimension, factor to SI); dBm and dBW are handled separately
_UNITS = {
    "bit": ("bits", 1.0), "kbit": ("bits", 1e3), "Mbit": ("bits", 1e6),
    "bps": ("bitrate", 1.0), "kbps": ("bitrate", 1e3), "Mbps": ("bitrate", 1e6), "Gbps": ("bitrate", 1e9),
    "Hz": ("frequency", 1.0), "kHz": ("frequency", 1e3), "MHz": ("frequency", 1e6),
    "W": ("power", 1.0), "mW": ("power", 1e-3),
    "W/Hz": ("psd", 1.0), "mW/Hz": ("psd", 1e-3),
    "m": ("length", 1.0), "km": ("length", 1e3),
    "s": ("time", 1.0), "ms": ("time", 1e-3),
}
_LOG_UNITS = {"dBm": ("power", -30.0), "dBW": ("power", 0.0), "dBm/Hz": ("psd", -30.0), "dBW/Hz": ("psd", 0.0)}
_SI_UNIT = {"bits": "bit", "bitrate": "bps", "frequency": "Hz", "power": "W", "psd": "W/Hz",
            "length": "m", "time": "s"}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z/]+)\s*$")


def parse_quantity(text, dimension: str, key: str = "") -> float:
    """``"3 km"`` -> 3000.0 (SI). Raises ConfigError for bare numbers or wrong dimensions."""
    label = f"'{key}'" if key else "value"
    if not isinstance(text, str):
        raise ConfigError(f"{label} is a physical quantity and needs a unit, e.g. \"{text} "
                          f"{_SI_UNIT[dimension]}\"")
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigError(f"{label}: cannot parse quantity {text!r}")
    number, unit = float(m.group(1)), m.group(2)
    if unit in _LOG_UNITS:
        dim, offset = _LOG_UNITS[unit]
        value = 10.0 ** ((number + offset) / 10.0)
    elif unit in _UNITS:
        dim, factor = _UNITS[unit]
        value = number * factor
    else:
        raise ConfigError(f"{label}: unknown unit {unit!r}")
    if dim != dimension:
        raise ConfigError(f"{label}: expected a {dimension} quantity, got unit {unit!r}")
    return value


def format_quantity(value: float, dimension: str) -> str:
    return f"{value!r} {_SI_UNIT[dimension]}"


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters in SI units."""
    arrival_bps: float = 40e3
    packet_bits: float = 1e4
    edge_capacity_bps: float = 30e6
    fog_capacity_bps: float = 15e6
    bandwidth_hz: float = 100e3
    noise_density_w_per_hz: float = 10.0 ** ((-174 - 30) / 10)   # -174 dBm/Hz
    uplink_power_w: float = 1.0
    downlink_power_w: float = 1.0
    uplink_distance_m: float = 3000.0
    downlink_distance_m: float = 10000.0
    path_loss_exp: float = 3.0
    processed_ratio: float = 0.2
    fade_floor: float = 1e-2


# config key -> (SystemParams field, dimension or None for dimensionless)
_PHYSICAL = {
    "arrival": ("arrival_bps", "bitrate"),
    "packet_size": ("packet_bits", "bits"),
    "edge_capacity": ("edge_capacity_bps", "bitrate"),
    "fog_capacity": ("fog_capacity_bps", "bitrate"),
    "bandwidth": ("bandwidth_hz", "frequency"),
    "noise_density": ("noise_density_w_per_hz", "psd"),
    "uplink_power": ("uplink_power_w", "power"),
    "downlink_power": ("downlink_power_w", "power"),
    "uplink_distance": ("uplink_distance_m", "length"),
    "downlink_distance": ("downlink_distance_m", "length"),
    "path_loss_exp": ("path_loss_exp", None),
    "processed_ratio": ("processed_ratio", None),
    "fade_floor": ("fade_floor", None),
}

SWEEP_PARAMETERS = ("devices", "slots", "packet", "power")
SWEEP_DIMENSION = {"devices": None, "slots": None, "packet": "bitrate", "power": "power"}
SWEEP_DISPLAY_UNIT = {"packet": "kbps", "power": "dBm"}
DEFAULT_GRIDS = {
    "devices": tuple(range(2, 11)),
    "slots": tuple(range(1, 11)),
    "packet": (10.0, 20.0, 40.0, 60.0, 80.0),        # kbps of offered traffic per source
    "power": (10.0, 20.0, 30.0, 40.0, 50.0, 60.0),   # dBm on both links
}
METHODS = ("analytic", "dueling", "plain", "random")


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter; ``values`` are in the display unit (kbps, dBm) or counts."""
    parameter: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS}, got {self.parameter!r}")
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if SWEEP_DIMENSION[self.parameter] is None:
            for v in self.values:
                if int(v) != v or v < 1:
                    raise ConfigError(f"{self.parameter} sweep values must be positive integers")
            object.__setattr__(self, "values", tuple(int(v) for v in self.values))

    @property
    def unit(self) -> str:
        return SWEEP_DISPLAY_UNIT.get(self.parameter, "")

    @classmethod
    def default(cls, parameter: str) -> "SweepSpec":
        return cls(parameter, DEFAULT_GRIDS[parameter])


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "base"
    num_sources: int = 10
    slots: int = 10
    slot_s: float = 1.0
    system: SystemParams = SystemParams()
    sweep: SweepSpec = SweepSpec.default("devices")
    methods: tuple[str, ...] = METHODS
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    replications: int = 1
    eval_episodes: int = 20
    train: TrainConfig = TrainConfig()
    literal_formulas: bool = False
    literal_reward_sign: bool = False
    notes: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.num_sources < 1 or self.slots < 1 or self.replications < 1 or self.eval_episodes < 1:
            raise ConfigError("num_sources, slots, replications and eval_episodes must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")

    def model(self, **overrides) -> SystemModel:
        """Symmetric system model; overrides may change num_sources, any SystemParams field."""
        j = overrides.pop("num_sources", self.num_sources)
        p = replace(self.system, **overrides)
        noise = p.noise_density_w_per_hz * p.bandwidth_hz
        up = ChannelParams(p.bandwidth_hz, p.uplink_power_w, noise, p.uplink_distance_m,
                           p.path_loss_exp, p.fade_floor)
        down = ChannelParams(p.bandwidth_hz, p.downlink_power_w, noise, p.downlink_distance_m,
                             p.path_loss_exp, p.fade_floor)
        return symmetric_model(j, p.arrival_bps / p.packet_bits, p.packet_bits,
                               p.edge_capacity_bps / p.packet_bits,
                               p.fog_capacity_bps / (p.processed_ratio * p.packet_bits),
                               up, down, p.processed_ratio)

    def point(self, parameter: str, value) -> tuple["ExperimentSpec", SystemModel]:
        """Spec and model at one sweep value."""
        if parameter == "devices":
            spec = replace(self, num_sources=int(value))
            return spec, spec.model()
        if parameter == "slots":
            spec = replace(self, slots=int(value))
            return spec, spec.model()
        if parameter == "packet":
            # offered traffic changes through the packet size; the packet rate stays fixed
            rate = self.system.arrival_bps / self.system.packet_bits
            bits = value * 1e3 / rate
            spec = replace(self, system=replace(self.system, packet_bits=bits, arrival_bps=value * 1e3))
            return spec, spec.model()
        if parameter == "power":
            w = 10.0 ** ((value - 30.0) / 10.0)
            spec = replace(self, system=replace(self.system, uplink_power_w=w, downlink_power_w=w))
            return spec, spec.model()
        raise ConfigError(f"unknown sweep parameter {parameter!r}")

    def to_dict(self) -> dict:
        d = {"name": self.name, "num_sources": self.num_sources, "slots": self.slots,
             "slot_duration": format_quantity(self.slot_s, "time")}
        for key, (attr, dim) in _PHYSICAL.items():
            v = getattr(self.system, attr)
            d[key] = v if dim is None else format_quantity(v, dim)
        unit = self.sweep.unit
        d["sweep"] = {"parameter": self.sweep.parameter,
                      "values": [f"{v!r} {unit}" if unit else v for v in self.sweep.values]}
        d.update(methods=list(self.methods), seeds=list(self.seeds), replications=self.replications,
                 eval_episodes=self.eval_episodes, train=self.train.to_dict(),
                 literal_formulas=self.literal_formulas, literal_reward_sign=self.literal_reward_sign)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


_TOP_KEYS = {"name", "num_sources", "slots", "slot_duration", "sweep", "methods", "seeds", "replications",
             "eval_episodes", "train", "literal_formulas", "literal_reward_sign"} | set(_PHYSICAL)


def _parse_sweep(raw) -> SweepSpec:
    if isinstance(raw, str):
        return SweepSpec.default(raw)
    if not isinstance(raw, dict):
        raise ConfigError("'sweep' must be a parameter name or an object")
    unknown = set(raw) - {"parameter", "values"}
    if unknown:
        raise ConfigError(f"unknown sweep keys {sorted(unknown)}")
    param = raw.get("parameter")
    if param not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS}, got {param!r}")
    if "values" not in raw:
        return SweepSpec.default(param)
    dim = SWEEP_DIMENSION[param]
    if dim is None:
        return SweepSpec(param, raw["values"])
    values = []
    for v in raw["values"]:
        si = parse_quantity(v, dim, f"sweep.values ({param})")
        if param == "power":
            values.append(10.0 * math.log10(si) + 30.0)
        else:
            values.append(si / 1e3)
    return SweepSpec(param, values)


def spec_from_dict(raw: dict) -> ExperimentSpec:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    sys_kwargs = {}
    for key, (attr, dim) in _PHYSICAL.items():
        if key not in raw:
            continue
        if dim is None:
            v = raw[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"'{key}' must be a plain number")
            sys_kwargs[attr] = float(v)
        else:
            sys_kwargs[attr] = parse_quantity(raw[key], dim, key)
    kwargs = {}
    for key in ("name", "num_sources", "slots", "replications", "eval_episodes",
                "literal_formulas", "literal_reward_sign"):
        if key in raw:
            kwargs[key] = raw[key]
    if "slot_duration" in raw:
        kwargs["slot_s"] = parse_quantity(raw["slot_duration"], "time", "slot_duration")
    if "methods" in raw:
        kwargs["methods"] = tuple(raw["methods"])
    if "seeds" in raw:
        kwargs["seeds"] = tuple(raw["seeds"])
    if "sweep" in raw:
        kwargs["sweep"] = _parse_sweep(raw["sweep"])
    if "train" in raw:
        known = {f.name for f in fields(TrainConfig)}
        bad = set(raw["train"]) - known
        if bad:
            raise ConfigError(f"unknown train keys {sorted(bad)}")
        kwargs["train"] = TrainConfig(**raw["train"])
    try:
        spec = ExperimentSpec(system=SystemParams(**sys_kwargs), **kwargs)
        model = spec.model()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return _attach_feasibility(spec, model)


def _attach_feasibility(spec: ExperimentSpec, model: SystemModel) -> ExperimentSpec:
    from .analytics import check_feasibility
    notes = [f"base model violates {c.name} (slack {c.slack:.4g})"
             for c in check_feasibility(model) if not c.satisfied]
    for n in notes:
        warnings.warn(n, RuntimeWarning, stacklevel=3)
    return replace(spec, notes=tuple(notes))


def load_config(path) -> ExperimentSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return spec_from_dict(raw)


def dump_config(spec: ExperimentSpec, path=None) -> str:
    text = json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
