import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgefog_aoi import des
from edgefog_aoi.des import AgeTrace, UndefinedAgeError, piecewise_age_area, time_average_age, update_areas
from conftest import table_model


def mm1_age(lam, mu):
    rho = lam / mu
    return (1 / mu) * (1 + 1 / rho + rho ** 2 / (1 - rho))


def riemann_average(trace, n=200_001):
    """Midpoint rule on a fine grid that also contains every delivery instant."""
    t = np.union1d(np.linspace(trace.t_start, trace.t_end, n), trace.delivery_times)
    mid = 0.5 * (t[1:] + t[:-1])
    return float(np.sum(trace.age_at(mid) * np.diff(t)) / (trace.t_end - trace.t_start))


def test_single_cycle_area():
    # update generated at 0 with system time 1, next generated at R=1 and delivered K=1 later
    tr = AgeTrace(0, 1.0, 1.0, [2.0], [1.0], 3.0)
    assert update_areas(tr)[0] == pytest.approx(1.5)


def test_area_geometry_when_gap_differs_from_system_time():
    # R=2, K=1: trapezoid under the age between the two generation instants shifted by K
    tr = AgeTrace(0, 1.0, 1.0, [3.0], [1.0], 3.0)
    assert update_areas(tr)[0] == pytest.approx(0.5 * 4 + 2 * 1)
    assert time_average_age(tr) * 2.0 == pytest.approx(piecewise_age_area(tr), rel=1e-14)


def test_periodic_limit():
    R, K, n = 0.7, 0.3, 20_000
    d = K + R * np.arange(1, n + 1)
    tr = AgeTrace(0, K, K, d, np.full(n, K), d[-1])
    assert time_average_age(tr) == pytest.approx(K + R / 2, rel=1e-9)


def test_empty_trace_raises():
    with pytest.raises(UndefinedAgeError):
        time_average_age(AgeTrace(0, 0.0, 0.0, [], [], 1.0))


def test_trace_validation():
    with pytest.raises(ValueError):
        AgeTrace(0, 0.0, 0.0, [0.5, 0.4], [0.1, 0.1], 1.0)
    with pytest.raises(ValueError):
        AgeTrace(0, 0.0, 0.0, [0.5], [-0.1], 1.0)


traces = st.integers(1, 30).flatmap(lambda n: st.tuples(
    st.lists(st.floats(0.01, 2.0), min_size=n, max_size=n),
    st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n),
    st.floats(0.0, 2.0), st.floats(0.0, 3.0)))


def build(gaps, fractions, age0, tail):
    """Random but consistent trace: each delivery is fresher than the age before it."""
    d, k, t, age = [], [], 0.0, age0
    for g, f in zip(gaps, fractions):
        t += g
        age += g
        k.append(f * age)
        d.append(t)
        age = k[-1]
    return AgeTrace(0, 0.0, age0, d, k, t + tail + 1e-3)


@settings(max_examples=100, deadline=None)
@given(traces)
def test_trapezoid_equals_direct_integration(args):
    tr = build(*args)
    direct = piecewise_age_area(tr) / (tr.t_end - tr.t_start)
    assert time_average_age(tr) == pytest.approx(direct, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(traces)
def test_trapezoid_equals_fine_grid(args):
    tr = build(*args)
    assert time_average_age(tr) == pytest.approx(riemann_average(tr), rel=1e-6)


def test_same_seed_identical_traces():
    m = table_model(2)
    a = des.run(m, np.random.default_rng(4), n_packets=5000)
    b = des.run(m, np.random.default_rng(4), n_packets=5000)
    for j in a.traces:
        assert np.array_equal(a.traces[j].delivery_times, b.traces[j].delivery_times)
        assert np.array_equal(a.traces[j].system_times, b.traces[j].system_times)
    assert a.mean_aoi == b.mean_aoi


def test_conservation_checked_at_every_event():
    m = table_model(3, rate=40.0)
    res = des.run(m, np.random.default_rng(0), n_packets=3000, check_invariants=True)
    assert res.packets_generated == 3000


def test_pipeline_timestamps_ordered():
    m = table_model(2, rate=30.0)
    sim = des.TandemSimulator(m, np.random.default_rng(2))
    sim.advance_to(50.0)
    sim.stop_arrivals()
    sim.drain()
    for pid in range(sim.generated):
        p = sim.packet(pid)
        stamps = [p.generated, p.uplink_start, p.uplink_end, p.proc_start, p.proc_end, p.delivered]
        assert all(b >= a for a, b in zip(stamps, stamps[1:]))
        assert p.system_time > 0


def test_light_traffic_has_no_queueing():
    m = table_model(2, rate=0.05)
    res = des.run(m, np.random.default_rng(1), horizon_s=20_000.0)
    assert res.mean_uplink_wait < 1e-4 and res.mean_proc_wait < 1e-6


def test_ages_positive_after_first_delivery():
    res = des.run(table_model(2), np.random.default_rng(3), n_packets=2000)
    for tr in res.traces.values():
        t = np.linspace(tr.t_start, tr.t_end, 1000)
        assert np.all(tr.age_at(t) > 0)


def test_mm1_degenerate_mode():
    lam, mu = 1.0, 2.0
    m = table_model(1, rate=lam, edge=mu)
    res = des.run(m, np.random.default_rng(7), n_packets=200_000, service_law="exponential",
                  zero_transmission=True)
    assert res.mean_aoi == pytest.approx(mm1_age(lam, mu), rel=0.03)


def test_littles_law_both_queues():
    # uplink at load ~0.5 on the real channel
    m = table_model(2, rate=38.0)
    res = des.run(m, np.random.default_rng(5), n_packets=200_000)
    lam = res.arrival_rate_observed
    assert res.mean_uplink_queue_len == pytest.approx(lam * res.mean_uplink_wait, rel=0.03)
    # processing queue fed directly with Poisson traffic at load 0.6
    m = table_model(2, rate=0.3, edge=1.0)
    res = des.run(m, np.random.default_rng(6), n_packets=200_000, service_law="exponential",
                  zero_transmission=True)
    lam = res.arrival_rate_observed
    assert res.mean_proc_queue_len == pytest.approx(lam * res.mean_proc_wait, rel=0.03)


def test_under_sampled_warning():
    m = table_model(2, rate=0.01)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = des.run(m, np.random.default_rng(0), horizon_s=1.0)
    assert res.warnings and any("under-sampled" in str(w.message) for w in caught)
    assert all(math.isnan(v) for v in res.per_source_aoi.values())


def test_run_argument_checks():
    m = table_model(1)
    with pytest.raises(ValueError):
        des.run(m, np.random.default_rng(0))
    with pytest.raises(ValueError):
        des.run(m, np.random.default_rng(0), n_packets=10, horizon_s=1.0)
    with pytest.raises(ValueError):
        des.TandemSimulator(m, np.random.default_rng(0), service_law="uniform")


def test_trace_csv_dump(tmp_path):
    res = des.run(table_model(2), np.random.default_rng(3), n_packets=500)
    path = tmp_path / "trace.csv"
    des.dump_trace_csv(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "delivery_time,system_time,source"
    assert len(lines) == 1 + sum(len(t.delivery_times) for t in res.traces.values())
