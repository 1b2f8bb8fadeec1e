import math

import numpy as np
import pytest

from edgefog_aoi.channel import ChannelParams
from edgefog_aoi.model import symmetric_model

# -174 dBm/Hz over 100 kHz
NOISE_W = 10.0 ** (-174 / 10) * 1e-3 * 1e5


def link(distance_m, power_w=1.0, bandwidth_hz=1e5, floor=1e-2):
    return ChannelParams(bandwidth_hz, power_w, NOISE_W, distance_m, 3.0, floor)


@pytest.fixture
def uplink():
    return link(3000.0)


@pytest.fixture
def downlink():
    return link(10000.0)


def unit_snr_channel(snr=1.0, bandwidth_hz=1.0, floor=1e-2):
    """Channel whose mean SNR is exactly ``snr`` (distance 1, path loss 1)."""
    return ChannelParams(bandwidth_hz, snr, 1.0, 1.0, 1.0, floor)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def table_model(num_sources=2, rate=4.0, bits=1e4, edge=None, power_w=1.0):
    up, down = link(3000.0, power_w), link(10000.0, power_w)
    edge = 3e7 / bits if edge is None else edge
    return symmetric_model(num_sources, rate, bits, edge, 1.5e7 / (0.2 * bits), up, down)


def rel(a, b):
    return abs(a - b) / abs(b) if b else math.inf


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
