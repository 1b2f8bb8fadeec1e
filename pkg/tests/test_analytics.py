import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from edgefog_aoi import analytics as A
from edgefog_aoi.model import InfeasibleError, Source, SystemModel, symmetric_model
from conftest import link, table_model


def edge_model(rates, mu, bits=1e4):
    up, down = link(3000.0), link(10000.0)
    return SystemModel(tuple(Source(r, bits, up) for r in rates), mu, 1.0, down)


def test_busy_probability_examples():
    assert A.busy_probability(edge_model([10, 20], 60)) == pytest.approx(0.5)
    assert A.busy_probability(edge_model([1.5], 3.0)) == pytest.approx(0.5)
    with pytest.raises(InfeasibleError) as info:
        A.busy_probability(edge_model([40], 30))
    assert info.value.constraint == A.PROCESSING


def test_residual_service_time_examples():
    assert A.residual_service_time(edge_model([1.0], 2.0)) == pytest.approx(0.25)
    one = A.residual_service_time(edge_model([0.7], 5.0))
    many = A.residual_service_time(edge_model([0.7] * 4, 5.0))
    assert many == pytest.approx(one, rel=1e-12) == pytest.approx(0.7 / 5 / (2 * 0.7), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5), st.floats(0.1, 100.0))
def test_residual_scales_inversely(rates, k):
    mu = 2.0 * sum(rates) + 1.0
    base = A.residual_service_time(edge_model(rates, mu))
    scaled = A.residual_service_time(edge_model([r * k for r in rates], mu * k))
    assert scaled == pytest.approx(base / k, rel=1e-10)


def test_processing_wait_single_source_example():
    assert A.processing_queue_wait(edge_model([1.0], 2.0), 0) == pytest.approx(0.25, rel=1e-14)
    assert A.processing_queue_wait(edge_model([1e-9], 2.0), 0) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.01, 0.95))
def test_processing_wait_is_md1_pollaczek_khinchine(lam, rho):
    mu = lam / rho
    got = A.processing_queue_wait(edge_model([lam], mu), 0)
    assert got == pytest.approx(lam / (2 * mu * mu * (1 - rho)), rel=1e-12)


def test_processing_wait_two_sources_frozen():
    # exact rational evaluation of the load-corrected composition
    rho = [Fraction(1, 4), Fraction(1, 4)]
    pb = sum(rho)
    resid = sum(r / 4 for r in rho) / (2 * pb)
    ref = pb * resid / ((1 - sum(rho)) * (1 - rho[0]))
    assert ref == Fraction(1, 6)
    m = edge_model([1.0, 1.0], 4.0)
    assert A.processing_queue_wait(m, 0) == pytest.approx(float(ref), rel=1e-14)
    assert A.processing_queue_wait(m, 1) == pytest.approx(float(ref), rel=1e-14)


def test_processing_wait_literal_form_frozen():
    m = edge_model([1.0, 1.0], 4.0)
    # numerator 1/8; denominators 2*(3/4)*1 for the first source, 2*(3/4)*(3/4) for the second
    assert A.processing_queue_wait(m, 0, literal=True) == pytest.approx(1 / 12, rel=1e-14)
    assert A.processing_queue_wait(m, 1, literal=True) == pytest.approx(1 / 9, rel=1e-14)
    with pytest.raises(IndexError):
        A.processing_queue_wait(m, 2)


def test_transmission_wait_example():
    m = edge_model([1.0], 10.0)
    assert A.transmission_queue_wait(m, [0.5], 0) == pytest.approx(0.5, rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 5.0), min_size=1, max_size=6), st.floats(0.01, 0.95))
def test_transmission_wait_closed_form(rates, rho_t):
    total = sum(rates)
    times = [rho_t / total] * len(rates)
    m = edge_model(rates, 1e6)
    for j in range(len(rates)):
        got = A.transmission_queue_wait(m, times, j)
        assert got == pytest.approx(rho_t ** 2 / ((1 - rho_t) * total), rel=1e-12)


def test_transmission_wait_light_traffic_quadratic():
    m = edge_model([1.0], 1e6)
    w1 = A.transmission_queue_wait(m, [1e-3], 0)
    w2 = A.transmission_queue_wait(m, [2e-3], 0)
    assert w1 < 1.1e-6
    assert w2 / w1 == pytest.approx(4.0 * (1 - 1e-3) / (1 - 2e-3), rel=1e-10)


def test_transmission_wait_symmetric_equals_aggregate():
    pair = A.transmission_queue_wait(edge_model([0.3, 0.3], 1e6), [0.5, 0.5], 0)
    single = A.transmission_queue_wait(edge_model([0.6], 1e6), [0.5], 0)
    assert pair == pytest.approx(single, rel=1e-14)


def test_transmission_wait_errors():
    with pytest.raises(InfeasibleError) as info:
        A.transmission_queue_wait(edge_model([2.0], 1e6), [0.6], 0)
    assert info.value.constraint == A.UPLINK
    with pytest.raises(ValueError):
        A.transmission_queue_wait(edge_model([0.5], 1e6), [0.5], 0, literal=True)
    lit = A.transmission_queue_wait(edge_model([0.5, 0.5], 1e6), [0.5, 0.5], 0, literal=True)
    assert lit == pytest.approx(0.25 / (0.5 * 0.75), rel=1e-14)


def test_breakdown_additivity_and_components():
    b = A.AoiBreakdown(0, 1.0, 0.5, 0.25, 0.1, 0.05, 0.5)
    assert b.total == pytest.approx(2.4, rel=1e-15)
    for row in A.aoi_breakdown(table_model(3)):
        assert row.total == sum(row.components())
        assert all(c >= 0 for c in row.components())


def test_age_grows_as_rate_vanishes():
    assert A.aoi_per_source(table_model(1, rate=1e-4), 0).total > 1e4


def test_system_aoi_normalisation():
    m = table_model(1)
    assert A.system_aoi(m, 1) == pytest.approx(A.aoi_per_source(m, 0).total, rel=1e-15)
    assert A.system_aoi(m, 2) == pytest.approx(A.system_aoi(m, 1) / 2, rel=1e-15)
    with pytest.raises(ValueError):
        A.system_aoi(m, 0)


def test_feasibility_report():
    checks = {c.name: c for c in A.check_feasibility(edge_model([10, 20], 60))}
    assert checks[A.PROCESSING].satisfied and checks[A.PROCESSING].slack == pytest.approx(0.5)
    zero = {c.name: c for c in A.check_feasibility(edge_model([0.0, 1.0], 60))}
    assert not zero[A.POSITIVE].satisfied


def test_uplink_overload_slack():
    base = table_model(1, rate=1.0)
    t_up = A.uplink_times(base)[0]
    m = base.with_arrival_rates([1.2 / t_up])
    c = {c.name: c for c in A.check_feasibility(m)}[A.UPLINK]
    assert not c.satisfied and c.slack == pytest.approx(-0.2, rel=1e-9)
    with pytest.raises(InfeasibleError) as info:
        A.system_aoi(m, 1)
    assert info.value.constraint == A.UPLINK


def test_age_increases_with_sources():
    totals = [A.mean_source_aoi(table_model(j)) for j in range(2, 11)]
    assert all(b >= a for a, b in zip(totals, totals[1:]))


@settings(max_examples=20, deadline=None)
@given(st.floats(1.0, 8.0), st.floats(1.1, 4.0))
def test_monotone_in_capacity_power_and_size(rate, factor):
    m = table_model(2, rate=rate)
    base = A.aoi_per_source(m, 0).total
    faster = A.aoi_per_source(table_model(2, rate=rate, edge=m.edge_capacity * factor), 0).total
    louder = A.aoi_per_source(table_model(2, rate=rate, power_w=factor), 0).total
    assert faster < base and louder < base
    # a larger packet at the same packet rate
    up, down = link(3000.0), link(10000.0)
    big = symmetric_model(2, rate, 1e4 * factor, m.edge_capacity, m.fog_capacity, up, down)
    assume(all(c.satisfied for c in A.check_feasibility(big)))
    assert A.aoi_per_source(big, 0).total > base
