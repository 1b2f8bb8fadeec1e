"""Rayleigh-faded Shannon links and the transmission time of a fixed-size packet.

A packet of ``S`` bits sent over a link with bandwidth ``W`` and instantaneous
power gain ``C`` takes ``S / (W log2(1 + snr * C))`` seconds, where ``snr`` is
the mean received SNR ``P d^-l / N``. ``C`` is exponential with unit mean.

The mean of that time is infinite: near ``C = 0`` the time behaves like
``1/C`` and the exponential density is flat there, so the tail of the time
distribution decays like ``1/t``. Every link therefore carries a ``fade_floor``;
gains below it are clipped, which caps the time at
``t_max = S ln2 / (W ln(1 + snr * fade_floor))``. A floor of 0 restores the
untruncated law (whose expectation raises :class:`QuadratureError`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .quadrature import QuadratureError, QuadratureSettings, integrate

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ChannelParams:
    bandwidth_hz: float
    tx_power_w: float
    noise_power_w: float
    distance_m: float
    path_loss_exp: float
    fade_floor: float = 1e-2

    def __post_init__(self):
        for name in ("bandwidth_hz", "tx_power_w", "noise_power_w", "distance_m", "path_loss_exp"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if self.path_loss_exp < 1:
            raise ValueError(f"path_loss_exp must be >= 1, got {self.path_loss_exp!r}")
        if not (math.isfinite(self.fade_floor) and self.fade_floor >= 0):
            raise ValueError(f"fade_floor must be finite and >= 0, got {self.fade_floor!r}")
        snr = self.mean_snr
        if not (math.isfinite(snr) and snr > 0):
            raise ValueError(f"mean SNR must be finite and > 0, got {snr!r}")

    @property
    def mean_snr(self) -> float:
        return self.tx_power_w * self.distance_m ** (-self.path_loss_exp) / self.noise_power_w


@dataclass(frozen=True)
class PacketSpec:
    size_bits: float

    def __post_init__(self):
        if not (math.isfinite(self.size_bits) and self.size_bits > 0):
            raise ValueError(f"size_bits must be finite and > 0, got {self.size_bits!r}")


def shannon_rate(ch: ChannelParams, gain):
    """Instantaneous rate in bit/s for power gain ``gain`` (scalar or array)."""
    g = np.asarray(gain, dtype=float)
    if np.any(g < 0):
        raise ValueError("channel gain must be >= 0")
    rate = ch.bandwidth_hz * np.log1p(ch.mean_snr * g) / LN2
    return float(rate) if rate.ndim == 0 else rate


def _scale(ch: ChannelParams, pkt: PacketSpec) -> float:
    # S ln2 / W: the time is this divided by ln(1 + snr C)
    return pkt.size_bits * LN2 / ch.bandwidth_hz


def max_tx_time(ch: ChannelParams, pkt: PacketSpec) -> float:
    """Largest possible transmission time (``inf`` when the fade floor is 0)."""
    if ch.fade_floor == 0:
        return math.inf
    return _scale(ch, pkt) / math.log1p(ch.mean_snr * ch.fade_floor)


def sample_tx_time(ch: ChannelParams, pkt: PacketSpec, rng: np.random.Generator,
                   size=None, gain=None):
    """Draw transmission time(s) in seconds.

    ``gain`` bypasses the fading draw (used to inject a known channel state).
    Exact-zero exponential draws are redrawn; gains under the fade floor are clipped.
    """
    if gain is None:
        c = rng.standard_exponential(size)
        if np.ndim(c) == 0:
            while c == 0.0:
                c = rng.standard_exponential()
        else:
            zero = c == 0.0
            while zero.any():
                c[zero] = rng.standard_exponential(int(zero.sum()))
                zero = c == 0.0
        c = np.maximum(c, ch.fade_floor)
    else:
        c = np.asarray(gain, dtype=float)
        if np.any(c <= 0):
            raise ValueError("injected gain must be > 0")
    t = _scale(ch, pkt) / np.log1p(ch.mean_snr * c)
    return float(t) if np.ndim(t) == 0 else t


class TxTimeStream:
    """Buffered per-packet sampler; draws in blocks to keep event loops cheap."""

    def __init__(self, ch: ChannelParams, pkt: PacketSpec, rng: np.random.Generator, block: int = 4096):
        self.ch, self.pkt, self.rng, self.block = ch, pkt, rng, block
        self._buf = []
        self._i = 0

    def next(self) -> float:
        if self._i >= len(self._buf):
            self._buf = sample_tx_time(self.ch, self.pkt, self.rng, size=self.block).tolist()
            self._i = 0
        v = self._buf[self._i]
        self._i += 1
        return v


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("t must be > 0")
    return t


def tx_time_cdf(ch: ChannelParams, pkt: PacketSpec, t):
    """P(time <= t). Reaches 1 at the fade-floor cap."""
    t = _check_t(t)
    a = _scale(ch, pkt)
    with np.errstate(over="ignore"):
        f = np.exp(-np.expm1(a / t) / ch.mean_snr)
    f = np.where(t >= max_tx_time(ch, pkt), 1.0, f)
    return float(f) if f.ndim == 0 else f


def tx_time_pdf(ch: ChannelParams, pkt: PacketSpec, t):
    """Density of the continuous part of the time law (zero beyond the cap)."""
    t = _check_t(t)
    a = _scale(ch, pkt)
    snr = ch.mean_snr
    with np.errstate(over="ignore"):
        x = a / t
        p = (a / snr) * np.exp(x - np.expm1(x) / snr) / (t * t)
    p = np.where(t >= max_tx_time(ch, pkt), 0.0, p)
    return float(p) if p.ndim == 0 else p


@lru_cache(maxsize=4096)
def expected_tx_time(ch: ChannelParams, pkt: PacketSpec,
                     quad: QuadratureSettings = QuadratureSettings()) -> float:
    """Mean transmission time: integral of t * pdf(t) plus the atom at the cap.

    Integrates in units of ``t0`` (the time at unit gain) over ``u = 1/(1 + t/t0)``,
    which maps ``(0, inf)`` onto ``(0, 1)``.
    """
    snr = ch.mean_snr
    b = math.log1p(snr)          # a / t0
    t0 = _scale(ch, pkt) / b
    floor = ch.fade_floor
    if floor > 0:
        s_max = b / math.log1p(snr * floor)
        u_lo = 1.0 / (1.0 + s_max)
        atom = s_max * -math.expm1(-floor)
    else:
        u_lo, atom = 0.0, 0.0

    def integrand(u):
        s = (1.0 - u) / u
        with np.errstate(over="ignore"):
            x = b / s
            dens = np.exp(x - np.expm1(x) / snr)
        return (b / snr) * dens / ((1.0 - u) * u)

    try:
        value, _ = integrate(integrand, u_lo, 1.0, quad)
    except QuadratureError as exc:
        raise QuadratureError("expected transmission time did not converge",
                              t0 * (exc.estimate + atom), t0 * exc.error) from None
    return t0 * (value + atom)
