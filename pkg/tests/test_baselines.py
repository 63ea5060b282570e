"""Spiral baselines: perimeter-first order, lattice search, 2D/3D modes."""

import numpy as np
import pytest

from absplace.baselines import (
    FLAG_FLEET_CAP,
    FLAG_UNMET_TARGET,
    MODE_2D,
    MODE_3D,
    SpiralParams,
    _candidate_offsets,
    best_radius_height,
    spiral_solve,
)
from absplace.channel import ChannelParams, coverage_radius
from absplace.scenario import AreaSpec, DistributionSpec, Point3, Scenario, default_tbs, generate_scenario


def _cluster_scenario(k=30, center=(50.0, 50.0), spread=1.0, seed=5, tbs=()):
    rng = np.random.default_rng(seed)
    users = [
        Point3(float(np.clip(rng.normal(center[0], spread), 0, 100)),
               float(np.clip(rng.normal(center[1], spread), 0, 100)))
        for _ in range(k)
    ]
    return Scenario(area=AreaSpec(100.0, 100.0), users=users, tbs=list(tbs), seed=seed)


def test_best_radius_height_default_channel(params):
    assert best_radius_height(params) == 9.0


def test_candidate_offsets_geometry():
    pts = _candidate_offsets(2.0, 1.0)
    assert pts.shape == (13, 2)  # integer points with x^2 + y^2 <= 4
    assert any((p == [0.0, 0.0]).all() for p in pts)
    assert (np.hypot(pts[:, 0], pts[:, 1]) <= 2.0 + 1e-9).all()
    # lattice is symmetric under negation
    assert {tuple(p) for p in pts} == {tuple(-p) for p in pts}


def test_candidate_offsets_step_scaling():
    coarse = _candidate_offsets(10.0, 5.0)
    fine = _candidate_offsets(10.0, 1.0)
    assert coarse.shape[0] < fine.shape[0]
    assert {tuple(p) for p in coarse} <= {tuple(p) for p in fine}


def test_spiral2d_flies_single_height(params):
    sc = generate_scenario(AreaSpec(100, 100), 80, tbs=[], seed=3)
    placement, _ = spiral_solve(sc, params, mode=MODE_2D)
    zs = {s.position.z for s in placement.sites if s.kind == "abs"}
    assert zs == {9.0}


def test_spiral2d_honors_height_override(params):
    sc = generate_scenario(AreaSpec(100, 100), 40, tbs=[], seed=4)
    placement, _ = spiral_solve(sc, params, SpiralParams(height_m=12.0), mode=MODE_2D)
    zs = {s.position.z for s in placement.sites if s.kind == "abs"}
    assert zs == {12.0}


def test_spiral3d_heights_come_from_scan(params):
    sc = generate_scenario(AreaSpec(100, 100), 80, tbs=[], seed=6)
    sp = SpiralParams(height_scan=(5.0, 7.0, 9.0))
    placement, _ = spiral_solve(sc, params, sp, mode=MODE_3D)
    for s in placement.sites:
        if s.kind == "abs":
            assert s.position.z in (5.0, 7.0, 9.0)


def test_spiral3d_single_height_scan_equals_2d(params):
    # with one candidate height the 3D search degenerates to the 2D one
    sc = generate_scenario(AreaSpec(100, 100), 70, tbs=[], seed=7)
    p2, f2 = spiral_solve(sc, params, SpiralParams(height_m=9.0), mode=MODE_2D)
    p3, f3 = spiral_solve(sc, params, SpiralParams(height_scan=(9.0,)), mode=MODE_3D)
    assert f2 == f3
    assert [(s.position.x, s.position.y, s.position.z) for s in p2.sites] == [
        (s.position.x, s.position.y, s.position.z) for s in p3.sites
    ]


def test_first_abs_lands_on_perimeter_outlier(params):
    sc = _cluster_scenario(k=10, center=(50, 50), spread=1.0, seed=9)
    sc.users.append(Point3(95.0, 95.0))
    placement, flags = spiral_solve(sc, params, mode=MODE_2D)
    first = placement.sites[0]
    assert first.kind == "abs" and first.id == 1
    d = np.hypot(first.position.x - 95.0, first.position.y - 95.0)
    assert d <= coverage_radius(9.0, params) + 1e-9
    assert flags == ()


def test_cluster_needs_one_abs(params):
    sc = _cluster_scenario(k=12)
    placement, flags = spiral_solve(sc, params, mode=MODE_2D)
    assert placement.abs_count == 1
    assert flags == ()


def test_capacity_binds_abs_count():
    params = ChannelParams(abs_capacity=5)
    sc = _cluster_scenario(k=30)
    placement, flags = spiral_solve(sc, params, SpiralParams(beta=0.0), mode=MODE_2D)
    assert placement.abs_count == 6  # 30 users / 5 per BS, all within one disc
    # the reported association is the shared nearest-feasible rule, which can
    # cover fewer users than the absorb bookkeeping when capacity is tight;
    # the flag always agrees with what is reported
    assert placement.assoc.covered_count <= 30
    if placement.assoc.covered_count < 30:
        assert FLAG_UNMET_TARGET in flags
    else:
        assert flags == ()


def test_strong_tbs_needs_no_abs(params, area):
    sc = generate_scenario(area, 40, tbs=default_tbs(area), seed=12)
    placement, flags = spiral_solve(sc, params, mode=MODE_2D)
    assert placement.abs_count == 0
    assert flags == ()
    assert placement.sites[0].kind == "tbs"


def test_fleet_cap_flags(params):
    sc = generate_scenario(AreaSpec(100, 100), 200, tbs=[], seed=13)
    placement, flags = spiral_solve(sc, params, SpiralParams(fleet_cap=2), mode=MODE_2D)
    assert placement.abs_count == 2
    assert FLAG_FLEET_CAP in flags
    assert FLAG_UNMET_TARGET in flags


def test_spiral_deterministic(params):
    sc = generate_scenario(AreaSpec(100, 100), 60, tbs=[], seed=14)
    for mode, sp in ((MODE_2D, None), (MODE_3D, SpiralParams(height_scan=(7.0, 9.0)))):
        a, fa = spiral_solve(sc, params, sp, mode=mode)
        b, fb = spiral_solve(sc, params, sp, mode=mode)
        assert fa == fb
        assert [(s.position.x, s.position.y, s.position.z) for s in a.sites] == [
            (s.position.x, s.position.y, s.position.z) for s in b.sites
        ]
        assert a.assoc.assignments == b.assoc.assignments


def test_every_abs_absorbs_new_users(params):
    # hotspot mix: perimeter-first should still never place a useless BS
    spec = DistributionSpec("hotspot", hotspot_count=3, hotspot_stddev=4.0, hotspot_fraction=0.7)
    sc = generate_scenario(AreaSpec(100, 100), 90, spec, tbs=[], seed=15)
    placement, flags = spiral_solve(sc, params, mode=MODE_2D)
    assert FLAG_UNMET_TARGET not in flags
    # solved without its cap, so every placed BS absorbed >= 1 user
    assert placement.abs_count <= 90
    assert placement.assoc.covered_count >= int(0.95 * 90)


def test_mode_validation(params, small_scenario):
    with pytest.raises(ValueError):
        spiral_solve(small_scenario, params, mode="4d")


def test_spiral_params_validation():
    with pytest.raises(ValueError):
        SpiralParams(grid_step_m=0.0)
    with pytest.raises(ValueError):
        SpiralParams(height_scan_step_m=-1.0)
    with pytest.raises(ValueError):
        SpiralParams(fleet_cap=0)


def test_bad_fixed_height_raises(params):
    sc = _cluster_scenario(k=5)
    with pytest.raises(ValueError):
        spiral_solve(sc, params, SpiralParams(height_m=500.0), mode=MODE_2D)


def test_empty_height_scan_raises(params):
    sc = _cluster_scenario(k=5)
    with pytest.raises(ValueError):
        spiral_solve(sc, params, SpiralParams(height_scan=(500.0,)), mode=MODE_3D)
