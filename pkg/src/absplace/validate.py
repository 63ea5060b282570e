"""Runtime invariant suite.

Each check returns (name, ok, detail). These are the physics/bookkeeping
identities that must hold no matter the scenario: force antisymmetry and
inverse-square decay, mirror symmetry, bit-identical trajectories under a
power-of-two charge rescale, conservation of association loads, frozen
heights in plane mode, dB/linear duality, line-of-sight monotonicity, and
the eligibility boundary of the coverage radius.
"""

from __future__ import annotations

import numpy as np

from .channel import (
    ChannelParams,
    abs_path_loss_db,
    abs_received_power,
    coverage_radius,
    los_probability,
    min_rx_power,
    received_power,
)
from .coverage import Site, nearest_feasible_association
from .force3d import ForceParams, pairwise_force, run_equilibrium, total_force
from .scenario import AreaSpec, DistributionSpec, Point3, default_tbs, generate_scenario

CheckResult = tuple[str, bool, str]


def _spread_positions(rng: np.random.Generator, n: int, lo: float, hi: float, z_lo: float, z_hi: float,
                      min_gap: float = 2.0) -> np.ndarray:
    """Random positions with a guaranteed pairwise gap so force magnitudes
    stay well conditioned."""
    pts: list[np.ndarray] = []
    while len(pts) < n:
        cand = np.array([rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(z_lo, z_hi)])
        if all(np.linalg.norm(cand - p) >= min_gap for p in pts):
            pts.append(cand)
    return np.array(pts)


def check_force_antisymmetry(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for _ in range(200):
        a = rng.uniform(-50.0, 50.0, 3)
        b = rng.uniform(-50.0, 50.0, 3)
        if np.linalg.norm(a - b) < 1e-6:
            continue
        qa = rng.uniform(0.05, 1.0)
        qb = rng.uniform(0.05, 1.0) * rng.choice([-1.0, 1.0])
        resid = pairwise_force(a, qa, b, qb) + pairwise_force(b, qb, a, qa)
        worst = max(worst, float(np.abs(resid).max()))
    ok = worst <= 1e-12
    return "force_antisymmetry", ok, f"max |F_ij + F_ji| = {worst:.3e} (tol 1e-12)"


def check_inverse_square(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    origin = np.zeros(3)
    for _ in range(100):
        d = rng.uniform(0.5, 40.0)
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        q = rng.uniform(0.1, 1.0)
        f1 = float(np.linalg.norm(pairwise_force(origin, q, d * u, 1.0)))
        f2 = float(np.linalg.norm(pairwise_force(origin, q, 2.0 * d * u, 1.0)))
        worst = max(worst, abs(4.0 * f2 - f1) / f1)
    ok = worst <= 1e-9
    return "force_inverse_square", ok, f"max rel dev of F(2d)/F(d) from 1/4 = {worst:.3e} (tol 1e-9)"


def check_mirror_symmetry(rng: np.random.Generator) -> CheckResult:
    width = 100.0
    pos = _spread_positions(rng, 6, 5.0, 95.0, 5.0, 15.0)
    k = 40
    users = np.column_stack([rng.uniform(0, width, k), rng.uniform(0, width, k), np.zeros(k)])
    charges = rng.uniform(0.1, 1.0, 6)

    f = total_force(pos, charges, users, user_charge=1.0)
    pos_m = pos.copy()
    pos_m[:, 0] = width - pos_m[:, 0]
    users_m = users.copy()
    users_m[:, 0] = width - users_m[:, 0]
    f_m = total_force(pos_m, charges, users_m, user_charge=1.0)

    expect = f.copy()
    expect[:, 0] = -expect[:, 0]
    worst = float(np.abs(f_m - expect).max())
    ok = worst <= 1e-9
    return "force_mirror_symmetry", ok, f"max field deviation under x-reflection = {worst:.3e} (tol 1e-9)"


def check_charge_rescale(rng: np.random.Generator) -> CheckResult:
    pos0 = _spread_positions(rng, 8, 10.0, 90.0, 10.0, 10.0)
    k = 60
    users = np.column_stack([rng.uniform(0, 100, k), rng.uniform(0, 100, k), np.zeros(k)])
    base = dict(eps_equilibrium_m=1e-12, window=10, max_iters=100)
    p1, _, _ = run_equilibrium(pos0.copy(), users, 20,
                               ForceParams(charge_scale=0.5, user_charge=1.0, **base))
    p2, _, _ = run_equilibrium(pos0.copy(), users, 20,
                               ForceParams(charge_scale=1.0, user_charge=2.0, **base))
    ok = bool(np.array_equal(p1, p2))
    detail = "trajectories bit-identical over 100 iterations" if ok else \
        f"positions diverged by {np.abs(p1 - p2).max():.3e}"
    return "charge_rescale_determinism", ok, detail


def check_plane_height_lock(rng: np.random.Generator) -> CheckResult:
    pos0 = _spread_positions(rng, 5, 10.0, 90.0, 9.0, 9.0)
    k = 50
    users = np.column_stack([rng.uniform(0, 100, k), rng.uniform(0, 100, k), np.zeros(k)])
    fp = ForceParams(eps_equilibrium_m=1e-12, window=10, max_iters=80)
    pos, _, _ = run_equilibrium(pos0.copy(), users, 20, fp, plane=True)
    ok = bool(np.array_equal(pos[:, 2], pos0[:, 2]))
    return "plane_height_lock", ok, "heights unchanged in plane mode" if ok else "heights drifted"


def check_association_conservation(rng: np.random.Generator, params: ChannelParams) -> CheckResult:
    area = AreaSpec(100.0, 100.0)
    scenario = generate_scenario(area, 120, DistributionSpec("uniform"), default_tbs(area),
                                 seed=int(rng.integers(0, 2**31)))
    sites = [Site(id=0, kind="tbs", position=scenario.tbs[0], capacity=params.tbs_capacity)]
    for i in range(4):
        sites.append(Site(id=i + 1, kind="abs",
                          position=Point3(rng.uniform(10, 90), rng.uniform(10, 90), rng.uniform(6, 12)),
                          capacity=params.abs_capacity))
    assoc = nearest_feasible_association(scenario.user_array(), sites, params)

    problems = []
    if sum(assoc.loads.values()) != assoc.covered_count:
        problems.append("load sum != covered count")
    by_id = {s.id: s for s in sites}
    for sid, load in assoc.loads.items():
        if load > by_id[sid].capacity:
            problems.append(f"site {sid} over capacity ({load} > {by_id[sid].capacity})")
    thr = min_rx_power(params)
    for user, sid in assoc.assignments.items():
        if received_power(scenario.users[user], by_id[sid], params) < thr:
            problems.append(f"user {user} assigned below threshold")
            break
    ok = not problems
    detail = f"{assoc.covered_count} users, loads conserved and within capacity" if ok else "; ".join(problems)
    return "association_conservation", ok, detail


def check_db_linear_duality(rng: np.random.Generator, params: ChannelParams) -> CheckResult:
    worst = 0.0
    for _ in range(200):
        h = rng.uniform(1.0, 100.0)
        r = rng.uniform(0.0, 200.0)
        p = abs_received_power(h, r, params)
        expect = params.abs_power_w * 10.0 ** (-abs_path_loss_db(h, r, params) / 10.0)
        worst = max(worst, abs(p - expect) / expect)
    ok = worst <= 1e-12
    return "db_linear_duality", ok, f"max rel gap = {worst:.3e} (tol 1e-12)"


def check_los_monotonicity(params: ChannelParams) -> CheckResult:
    r = 30.0
    heights = np.linspace(0.1, 300.0, 600)
    p = np.array([los_probability(float(h), r, params) for h in heights])
    diffs = np.diff(p)
    ok = bool((diffs >= -1e-15).all()) and p[-1] > p[0]
    return "los_monotone_in_elevation", ok, f"min step = {diffs.min():.3e} over {len(p)} samples"


def check_radius_boundary(params: ChannelParams) -> CheckResult:
    h = 9.0
    r = coverage_radius(h, params)
    thr = min_rx_power(params)
    inside = abs_received_power(h, r, params) >= thr
    outside = abs_received_power(h, r + 1e-3, params) < thr
    ok = bool(inside and outside) and r > 0.0
    return "coverage_radius_boundary", ok, f"r({h:g} m) = {r:.6f} m brackets the power threshold"


def run_all(seed: int = 0, params: ChannelParams | None = None) -> list[CheckResult]:
    params = params or ChannelParams()
    rng = np.random.default_rng(seed)
    return [
        check_force_antisymmetry(rng),
        check_inverse_square(rng),
        check_mirror_symmetry(rng),
        check_charge_rescale(rng),
        check_plane_height_lock(rng),
        check_association_conservation(rng, params),
        check_db_linear_duality(rng, params),
        check_los_monotonicity(params),
        check_radius_boundary(params),
    ]
