"""Association bookkeeping, evaluation math, and the nearest-feasible rule."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from absplace.channel import ChannelParams, min_rx_power, received_power, user_bit_rate
from absplace.coverage import (
    Association,
    Placement,
    Site,
    coverage_target,
    evaluate,
    feasibility_check,
    nearest_feasible_association,
    rx_power_matrix,
)
from absplace.scenario import Point3, Scenario, AreaSpec, default_tbs, generate_scenario


def _abs_site(sid, x, y, z, cap=20):
    return Site(id=sid, kind="abs", position=Point3(x, y, z), capacity=cap)


def test_coverage_target_values():
    assert coverage_target(100, 0.05) == 95
    assert coverage_target(200, 0.05) == 190
    assert coverage_target(10, 0.0) == 10
    assert coverage_target(10, 1.0) == 0
    assert coverage_target(0, 0.5) == 0
    # floating beta slack must not round 0.95*60 = 57.0 up to 58
    assert coverage_target(60, 0.05) == 57


@settings(max_examples=80, deadline=None)
@given(k=st.integers(min_value=0, max_value=3000), beta=st.floats(min_value=0.0, max_value=1.0))
def test_coverage_target_bounds(k, beta):
    t = coverage_target(k, beta)
    assert 0 <= t <= k
    # never demands more than the exact real target plus rounding
    assert t >= (1.0 - beta) * k - 1e-6


def test_coverage_target_rejects_bad_beta():
    with pytest.raises(ValueError):
        coverage_target(10, -0.1)
    with pytest.raises(ValueError):
        coverage_target(10, 1.1)


def test_association_loads_and_count():
    a = Association()
    a.assign(0, 1)
    a.assign(1, 1)
    a.assign(2, 0)
    assert a.covered_count == 3
    assert a.loads == {1: 2, 0: 1}
    assert a.load(1) == 2
    a.assign(0, 0)  # reassignment moves, not duplicates
    assert a.covered_count == 3
    assert a.loads == {1: 1, 0: 2}


def test_site_validation():
    with pytest.raises(ValueError):
        Site(id=0, kind="ground", position=Point3(0, 0, 0), capacity=1)
    with pytest.raises(ValueError):
        Site(id=0, kind="abs", position=Point3(0, 0, 10), capacity=-1)


def test_rx_power_matrix_matches_scalar(params, small_scenario):
    sites = [
        Site(id=0, kind="tbs", position=small_scenario.tbs[0], capacity=params.tbs_capacity),
        _abs_site(1, 30.0, 40.0, 9.0),
    ]
    mat = rx_power_matrix(small_scenario.user_array(), sites, params)
    for k in range(small_scenario.k_total):
        for j, s in enumerate(sites):
            assert mat[k, j] == pytest.approx(
                received_power(small_scenario.users[k], s, params), rel=1e-12
            )


def test_evaluate_rate_math(params):
    area = AreaSpec(50.0, 50.0)
    sc = Scenario(area=area, users=[Point3(10, 10), Point3(12, 10), Point3(40, 40)], tbs=[])
    site = _abs_site(1, 11.0, 10.0, 9.0)
    assoc = Association()
    assoc.assign(0, 1)
    assoc.assign(1, 1)
    rep = evaluate(sc, [site], assoc, params)

    p0 = received_power(sc.users[0], site, params)
    p1 = received_power(sc.users[1], site, params)
    r0, r1 = user_bit_rate(p0, params), user_bit_rate(p1, params)
    assert rep.covered_count == 2
    assert rep.outage_fraction == pytest.approx(1.0 / 3.0, rel=1e-12)
    assert rep.avg_rate_covered_bps == pytest.approx((r0 + r1) / 2, rel=1e-12)
    assert rep.avg_rate_all_bps == pytest.approx((r0 + r1) / 3, rel=1e-12)
    assert rep.total_rx_power_w == pytest.approx(p0 + p1, rel=1e-12)
    assert rep.abs_count == 1


def test_evaluate_empty_association_flagged(params, small_scenario):
    rep = evaluate(small_scenario, [], Association(), params)
    assert rep.covered_count == 0
    assert rep.avg_rate_covered_bps == 0.0
    assert "no_covered_users" in rep.flags


def test_nearest_feasible_prefers_closest(params):
    users = np.array([[10.0, 10.0, 0.0], [90.0, 90.0, 0.0]])
    near = _abs_site(1, 12.0, 10.0, 9.0)
    far = _abs_site(2, 88.0, 90.0, 9.0)
    assoc = nearest_feasible_association(users, [near, far], params)
    assert assoc.assignments == {0: 1, 1: 2}


def test_nearest_feasible_respects_capacity(params):
    users = np.array([[10.0 + i, 10.0, 0.0] for i in range(4)])
    only = _abs_site(1, 11.0, 10.0, 9.0, cap=2)
    assoc = nearest_feasible_association(users, [only], params)
    assert assoc.covered_count == 2
    assert assoc.load(1) == 2


def test_nearest_feasible_skips_ineligible(params):
    users = np.array([[0.0, 0.0, 0.0]])
    faraway = _abs_site(1, 99.0, 99.0, 9.0)
    assoc = nearest_feasible_association(users, [faraway], params)
    assert assoc.covered_count == 0


def test_nearest_feasible_tie_lowest_id(params):
    users = np.array([[50.0, 50.0, 0.0]])
    left = _abs_site(3, 45.0, 50.0, 9.0)
    right = _abs_site(2, 55.0, 50.0, 9.0)
    assoc = nearest_feasible_association(users, [left, right], params)
    assert assoc.assignments[0] == 2


def test_nearest_feasible_never_violates(params, area):
    sc = generate_scenario(area, 150, tbs=default_tbs(area), seed=33)
    sites = [Site(id=0, kind="tbs", position=sc.tbs[0], capacity=params.tbs_capacity)]
    rng = np.random.default_rng(5)
    for i in range(5):
        sites.append(_abs_site(i + 1, rng.uniform(10, 90), rng.uniform(10, 90), rng.uniform(7, 11)))
    assoc = nearest_feasible_association(sc.user_array(), sites, params)
    thr = min_rx_power(params)
    by_id = {s.id: s for s in sites}
    for u, sid in assoc.assignments.items():
        assert received_power(sc.users[u], by_id[sid], params) >= thr
    for sid, load in assoc.loads.items():
        assert load <= by_id[sid].capacity


def test_feasibility_check_reports_violations(params):
    sc = Scenario(area=AreaSpec(50, 50), users=[Point3(10, 10), Point3(45, 45)], tbs=[])
    site = _abs_site(1, 10.0, 10.0, 9.0, cap=1)
    ok = Association()
    ok.assign(0, 1)
    assert feasibility_check(sc, [site], ok, params, beta=0.5) == []

    overloaded = Association()
    overloaded.assign(0, 1)
    overloaded.assign(1, 1)  # second user is both out of range and over capacity
    msgs = feasibility_check(sc, [site], overloaded, params, beta=0.5)
    assert any("overloaded" in m for m in msgs)
    assert any("below SNR" in m for m in msgs)

    unknown = Association()
    unknown.assign(0, 9)
    msgs = feasibility_check(sc, [site], unknown, params, beta=1.0)
    assert any("unknown site" in m for m in msgs)

    empty = Association()
    msgs = feasibility_check(sc, [site], empty, params, beta=0.0)
    assert any("below target" in m for m in msgs)


def test_placement_abs_count(params):
    sites = [
        Site(id=0, kind="tbs", position=Point3(0, 0, 0), capacity=5),
        _abs_site(1, 1, 1, 9),
        _abs_site(2, 2, 2, 9),
    ]
    assert Placement(sites=sites, assoc=Association()).abs_count == 2
