"""Force-directed aerial BS deployment.

Aerial BSs carry positive charges shrinking with their load, users carry a
fixed negative charge, and every BS moves a fixed-length step along its net
Coulomb force each iteration until the fleet stops drifting. The full solve
follows the staged pipeline: minimum fleet on the launch plane, grow while
outage exceeds the tolerance, lift the whole plane to the best height, then
refine each BS vertically over its locked users and relax in free 3D.

Moves are exactly `step_m` long (normalized force), so "equilibrium" means
the net displacement of every BS over the trailing `window` iterations fell
below `eps_equilibrium_m`, not that single steps shrink.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelParams,
    abs_received_power,
    coverage_radius,
    coverage_radius_profile,
    min_rx_power,
    tbs_received_power,
    user_bit_rate,
)
from .coverage import (
    Association,
    Placement,
    Site,
    coverage_target,
    nearest_feasible_association,
    rx_power_matrix,
)
from .scenario import AreaSpec, Point3, Scenario

log = logging.getLogger(__name__)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

FLAG_FLEET_CAP = "fleet_cap_reached"
FLAG_NO_EQUILIBRIUM = "no_equilibrium"
FLAG_UNMET_TARGET = "unmet_coverage_target"
FLAG_EMPTY_FIELD = "empty_force_field"


@dataclass(frozen=True)
class ForceParams:
    beta: float = 0.05
    step_m: float = 0.4              # displacement per iteration
    charge_scale: float = 0.5        # load-to-charge factor, (0, 1]
    user_charge: float = 1.0
    eps_equilibrium_m: float = 0.05  # net drift over the window
    window: int = 10
    max_iters: int = 5000
    softening_m: float = 0.1         # force magnitude cap below this range
    height_probe_budget: int = 12    # plane height search evaluations
    vertical_step_m: float = 1.0
    fleet_floor: int | None = None   # None = density lower bound
    # roughly the disc count that blankets the default area at the widest
    # radius, with slack so h_min sits below h_max and the vertical search
    # has a real band to work in; larger caps drag every launch height down
    fleet_cap: int = 36
    include_tbs_served: bool = False
    height_scan_max_m: float = 150.0
    height_scan_step_m: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.charge_scale <= 1.0:
            raise ValueError("charge_scale must lie in (0, 1]")
        if self.step_m <= 0 or self.eps_equilibrium_m <= 0:
            raise ValueError("step and equilibrium tolerance must be positive")
        if self.window < 1 or self.max_iters < 1:
            raise ValueError("window and max_iters must be >= 1")
        if self.height_probe_budget < 4:
            raise ValueError("height_probe_budget must be >= 4")
        if self.fleet_cap < 1:
            raise ValueError("fleet_cap must be >= 1")


@dataclass(frozen=True)
class HeightBounds:
    h_min: float
    h_max: float


@dataclass
class AbsState:
    position: np.ndarray
    charge: float = 0.0
    load: int = 0
    locked_users: tuple[int, ...] = ()


@dataclass
class Force3dInfo:
    fleet_size: int
    plane_height: float
    bounds: HeightBounds
    iterations: int
    converged: bool
    flags: tuple[str, ...]


def pairwise_force(pos_i, charge_i: float, pos_j, charge_j: float, softening_m: float = 0.1) -> np.ndarray:
    """Coulomb force on i from j. Exactly inverse-square for separations
    >= softening_m; magnitude capped below it; coincident points raise."""
    a = np.asarray(pos_i, dtype=float)
    b = np.asarray(pos_j, dtype=float)
    delta = a - b
    dist = float(np.linalg.norm(delta))
    if dist == 0.0:
        raise ValueError("coincident points have no force direction")
    mag = charge_i * charge_j / max(dist * dist, softening_m * softening_m)
    return mag * delta / dist


def _net_forces(
    positions: np.ndarray,
    charges: np.ndarray,
    du_diff: np.ndarray,
    du2: np.ndarray,
    du: np.ndarray,
    user_charge: float,
    softening_m: float,
    plane: bool,
) -> np.ndarray:
    """Force assembly on precomputed BS-to-user geometry (du_* have shape
    (n, k[, 3])); the BS-BS term is recomputed here. Shared by total_force
    and the equilibrium loop so both see bit-identical dynamics."""
    n = positions.shape[0]
    soft2 = softening_m * softening_m
    forces = np.zeros((n, 3))

    if n > 1:
        diff = positions[:, None, :] - positions[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        d = np.sqrt(d2)
        d_safe = np.where(d > 0.0, d, 1.0)
        qq = charges[:, None] * charges[None, :]
        scale = np.where(d > 0.0, qq / (np.maximum(d2, soft2) * d_safe), 0.0)
        np.fill_diagonal(scale, 0.0)
        forces += np.einsum("ij,ijk->ik", scale, diff)

    if du2.shape[1]:
        d_safe = np.where(du > 0.0, du, 1.0)
        qu = charges[:, None] * (-user_charge)
        scale = np.where(du > 0.0, qu / (np.maximum(du2, soft2) * d_safe), 0.0)
        forces += np.einsum("ij,ijk->ik", scale, du_diff)

    if plane:
        forces[:, 2] = 0.0
    return forces


def _user_geometry(positions: np.ndarray, field_users: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if field_users.shape[0] == 0:
        z = np.zeros((positions.shape[0], 0))
        return np.zeros((positions.shape[0], 0, 3)), z, z
    du_diff = positions[:, None, :] - field_users[None, :, :]
    du2 = np.einsum("ijk,ijk->ij", du_diff, du_diff)
    return du_diff, du2, np.sqrt(du2)


def total_force(
    positions: np.ndarray,
    charges: np.ndarray,
    field_users: np.ndarray,
    user_charge: float,
    softening_m: float = 0.1,
    plane: bool = False,
) -> np.ndarray:
    """Net force on every aerial BS: repulsion from the other BSs plus
    attraction toward every field user. Coincident pairs contribute zero.
    Plane mode zeroes the vertical component."""
    du_diff, du2, du = _user_geometry(positions, field_users)
    return _net_forces(positions, charges, du_diff, du2, du, user_charge, softening_m, plane)


def step(
    positions: np.ndarray,
    forces: np.ndarray,
    step_m: float,
    z_bounds: tuple[float, float] | None = None,
) -> np.ndarray:
    """Move each BS one fixed-length step along its force; zero force holds
    position. Heights clamp to z_bounds when given."""
    out = positions.copy()
    norms = np.linalg.norm(forces, axis=1)
    moving = norms > 0.0
    out[moving] += step_m * forces[moving] / norms[moving, None]
    if z_bounds is not None:
        out[:, 2] = np.clip(out[:, 2], z_bounds[0], z_bounds[1])
    return out


def _claim_users(dist: np.ndarray, capacity: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Sequential claiming on a precomputed (n, k) distance matrix: in BS
    index order, each takes its nearest still-available users up to capacity
    (distance ties broken by user index)."""
    n, k = dist.shape
    claims: list[np.ndarray] = []
    if k == 0 or capacity == 0:
        claims = [np.empty(0, dtype=int) for _ in range(n)]
        return claims, np.zeros(n, dtype=int)
    order = np.argsort(dist, axis=1, kind="stable")
    available = np.ones(k, dtype=bool)
    for i in range(n):
        oi = order[i]
        take = oi[available[oi]][:capacity]
        available[take] = False
        claims.append(take)
    return claims, np.array([c.size for c in claims], dtype=int)


def associate_and_charge(
    positions: np.ndarray,
    field_users: np.ndarray,
    capacity: int,
    charge_scale: float,
) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """BSs claim their nearest remaining users in index order, up to
    capacity; charges then decay with load: charge_scale / (load + 1)."""
    _, _, du = _user_geometry(positions, field_users)
    claims, loads = _claim_users(du, capacity)
    charges = charge_scale / (loads + 1.0)
    return claims, charges, loads


def run_equilibrium(
    positions: np.ndarray,
    field_users: np.ndarray,
    capacity: int,
    fp: ForceParams,
    z_bounds: tuple[float, float] | None = None,
    plane: bool = False,
    trace: list | None = None,
    phase: str = "",
) -> tuple[np.ndarray, int, bool]:
    """Iterate claim -> force -> step until every BS drifts less than the
    tolerance over the trailing window, or max_iters."""
    pos = positions.copy()
    hist: deque[np.ndarray] = deque(maxlen=fp.window + 1)
    hist.append(pos.copy())
    converged = False
    it = 0
    for it in range(1, fp.max_iters + 1):
        # one geometry pass feeds both the claiming pass and the user term
        du_diff, du2, du = _user_geometry(pos, field_users)
        _, loads = _claim_users(du, capacity)
        charges = fp.charge_scale / (loads + 1.0)
        forces = _net_forces(pos, charges, du_diff, du2, du, fp.user_charge, fp.softening_m, plane)
        pos = step(pos, forces, fp.step_m, z_bounds)
        if trace is not None:
            for i in range(pos.shape[0]):
                trace.append((phase, it, i, pos[i, 0], pos[i, 1], pos[i, 2]))
        hist.append(pos.copy())
        if len(hist) == fp.window + 1:
            drift = float(np.linalg.norm(pos - hist[0], axis=1).max())
            if drift < fp.eps_equilibrium_m:
                converged = True
                break
    return pos, it, converged


def radius_profile(heights, params: ChannelParams) -> np.ndarray:
    return np.array([coverage_radius(float(h), params) for h in np.atleast_1d(heights)])


def _scan_profile(fp: ForceParams, params: ChannelParams) -> tuple[np.ndarray, np.ndarray]:
    pairs = coverage_radius_profile(params, fp.height_scan_step_m, fp.height_scan_max_m)
    arr = np.asarray(pairs)
    return arr[:, 0], arr[:, 1]


def height_bounds(
    area: AreaSpec, n_available: int, params: ChannelParams, fp: ForceParams | None = None
) -> HeightBounds:
    """Operational height band from the coverage-radius profile.

    h_max maximizes the eligibility radius. h_min is the lowest height whose
    radius lets n_available discs tile the area (radius >= sqrt(area/(n*pi)));
    when no height reaches that radius, h_min clamps to h_max with a warning.
    """
    if n_available < 1:
        raise ValueError("n_available must be >= 1")
    fp = fp or ForceParams()
    heights, radii = _scan_profile(fp, params)
    if radii.max() <= 0.0:
        raise ValueError("no height yields any coverage under these channel parameters")
    h_max = float(heights[int(np.argmax(radii))])
    required = math.sqrt(area.size_m2 / (n_available * math.pi))
    meets = np.flatnonzero(radii >= required)
    if meets.size:
        h_min = float(heights[meets[0]])
    else:
        log.warning(
            "no height reaches the %.1f m radius needed for %d aerial BSs; clamping h_min to h_max",
            required,
            n_available,
        )
        h_min = h_max
    return HeightBounds(h_min=min(h_min, h_max), h_max=h_max)


def fleet_rate_metric(positions: np.ndarray, field_users: np.ndarray, params: ChannelParams) -> float:
    """Mean rate over the field users when each takes the nearest eligible
    BS with spare capacity; unserved users count as zero."""
    k = field_users.shape[0]
    if k == 0 or positions.shape[0] == 0:
        return 0.0
    sites = [
        Site(id=i + 1, kind="abs", position=Point3(*positions[i]), capacity=params.abs_capacity)
        for i in range(positions.shape[0])
    ]
    assoc = nearest_feasible_association(field_users, sites, params)
    powers = rx_power_matrix(field_users, sites, params)
    total = 0.0
    for u, sid in assoc.assignments.items():
        total += float(user_bit_rate(powers[u, sid - 1], params))
    return total / k


def plane_height_search(
    base_positions: np.ndarray,
    field_users: np.ndarray,
    bounds: HeightBounds,
    params: ChannelParams,
    fp: ForceParams,
    trace: list | None = None,
) -> tuple[float, np.ndarray, float]:
    """Best common plane height by golden-section over [h_min, h_max].

    Every probe re-equilibrates the plane at that height (warm-started from
    the nearest settled probe), then scores the mean field-user rate. Both
    interval endpoints are always probed, so the returned height is never
    worse than either bound. Total equilibrium evaluations are capped by
    height_probe_budget and stop early once the bracket is narrower than
    vertical_step_m.
    """

    cache: dict[float, tuple[float, np.ndarray]] = {}

    def probe(h: float) -> tuple[float, np.ndarray]:
        # continuation: relax from the closest already-settled plane, not
        # from scratch, so nearby probes cost a few dozen iterations
        if cache:
            nearest = min(cache, key=lambda hp: (abs(hp - h), hp))
            pos = cache[nearest][1].copy()
        else:
            pos = base_positions.copy()
        pos[:, 2] = h
        pos, _, _ = run_equilibrium(
            pos, field_users, params.abs_capacity, fp, z_bounds=None, plane=True,
            trace=trace, phase=f"height_probe_{h:.3f}",
        )
        return fleet_rate_metric(pos, field_users, params), pos

    a, b = bounds.h_min, bounds.h_max
    if a == b:
        rate, pos = probe(a)
        return a, pos, rate

    def eval_h(h: float) -> float:
        if h not in cache:
            cache[h] = probe(h)
        return cache[h][0]

    eval_h(a)
    eval_h(b)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    eval_h(c)
    eval_h(d)
    # probing below the refine step resolves nothing the vertical pass
    # could use, so stop there even with budget left
    min_span = max(fp.vertical_step_m, 1e-9)
    while len(cache) < fp.height_probe_budget and (b - a) > min_span:
        if eval_h(c) >= eval_h(d):
            b, d = d, c
            c = b - _GOLDEN * (b - a)
            eval_h(c)
        else:
            a, c = c, d
            d = a + _GOLDEN * (b - a)
            eval_h(d)
    best_h = max(cache, key=lambda h: (cache[h][0], -h))
    rate, pos = cache[best_h]
    return best_h, pos, rate


def vertical_refine(
    positions: np.ndarray,
    locked: list[np.ndarray],
    bounds: HeightBounds,
    field_users: np.ndarray,
    params: ChannelParams,
    fp: ForceParams,
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Per-BS height scan maximizing the mean eligible rate to its locked
    users; the incumbent height is always a candidate, so the locked-set
    rate never decreases. BSs whose locked set is ineligible at every
    candidate height stay put and raise a flag."""
    thr = min_rx_power(params)
    out = positions.copy()
    flags: list[str] = []
    grid = np.arange(bounds.h_min, bounds.h_max + fp.vertical_step_m / 2, fp.vertical_step_m)
    for i in range(out.shape[0]):
        idx = locked[i] if i < len(locked) else np.empty(0, dtype=int)
        if idx.size == 0:
            continue
        zs = np.unique(np.append(grid, out[i, 2]))
        ux = field_users[idx]
        r = np.hypot(ux[:, 0] - out[i, 0], ux[:, 1] - out[i, 1])
        h = zs[:, None] - ux[None, :, 2]
        p = abs_received_power(h, r[None, :], params)
        rates = np.where(p >= thr, user_bit_rate(p, params), 0.0).mean(axis=1)
        best = int(np.argmax(rates))
        if rates[best] <= 0.0:
            flags.append(f"abs_{i}_vertical_refine_ineligible")
            continue
        out[i, 2] = float(zs[best])
    return out, tuple(flags)


def _expected_users_per_disc(field_users: np.ndarray, radius: float, capacity: int) -> float:
    """How many field users one coverage disc claims on average: the mean
    count of neighbors within `radius` (horizontally, self included), capped
    by capacity. Sizes the launch fleet so growth is a correction, not the
    main loop. O(k^2) pairwise, fine for harness-scale user counts."""
    k = field_users.shape[0]
    if k == 0 or radius <= 0.0:
        return float(max(capacity, 1))
    diff = field_users[:, None, :2] - field_users[None, :, :2]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    neighbors = (d2 <= radius * radius).sum(axis=1)
    return float(min(float(capacity), float(neighbors.mean())))


def tbs_served_users(scenario: Scenario, params: ChannelParams) -> np.ndarray:
    """The users the terrestrial BS keeps: nearest eligible ones up to its
    capacity (ties by index)."""
    users = scenario.user_array()
    taken = np.zeros(scenario.k_total, dtype=bool)
    for t in scenario.tbs:
        dx = users[:, 0] - t.x
        dy = users[:, 1] - t.y
        dz = users[:, 2] - t.z
        d = np.sqrt(dx * dx + dy * dy + dz * dz)
        elig = (tbs_received_power(np.maximum(d, 1e-12), params) >= min_rx_power(params)) & ~taken
        idx = np.flatnonzero(elig)
        order = np.argsort(d[idx], kind="stable")
        take = idx[order[: params.tbs_capacity]]
        taken[take] = True
    return np.flatnonzero(taken)


def _fleet_sites(scenario: Scenario, positions: np.ndarray, params: ChannelParams) -> list[Site]:
    sites = []
    if scenario.tbs:
        sites.append(Site(id=0, kind="tbs", position=scenario.tbs[0], capacity=params.tbs_capacity))
    for i in range(positions.shape[0]):
        sites.append(
            Site(id=i + 1, kind="abs", position=Point3(*positions[i]), capacity=params.abs_capacity)
        )
    return sites


def force3d_solve(
    scenario: Scenario,
    params: ChannelParams,
    fp: ForceParams | None = None,
    trace: list | None = None,
) -> tuple[Placement, Force3dInfo]:
    """Full staged solve; see module docstring. Deterministic given the
    scenario seed (fleet launch positions come from it)."""
    fp = fp or ForceParams()
    if params.abs_capacity < 1:
        raise ValueError("force placement needs abs_capacity >= 1")
    users = scenario.user_array()
    k = scenario.k_total
    target = coverage_target(k, fp.beta)
    rng = np.random.default_rng(scenario.seed)
    flags: list[str] = []

    served = tbs_served_users(scenario, params)
    if fp.include_tbs_served:
        field_idx = np.arange(k)
    else:
        mask = np.ones(k, dtype=bool)
        mask[served] = False
        field_idx = np.flatnonzero(mask)
    field_users = users[field_idx]

    bounds = height_bounds(scenario.area, fp.fleet_cap, params, fp)
    needed = max(0, target - served.size)
    if fp.fleet_floor is not None:
        n = max(1, fp.fleet_floor)
    else:
        per_disc = _expected_users_per_disc(
            field_users, coverage_radius(bounds.h_min, params), params.abs_capacity
        )
        if needed <= per_disc:
            n_density = 1
        else:
            # multi-disc coverings overlap themselves by >= 2*pi/sqrt(27)
            # (Kershner's bound), discounting each disc's unique contribution
            overlap = 2.0 * math.pi / math.sqrt(27.0)
            n_density = math.ceil(needed * overlap / per_disc)
        n = max(1, math.ceil(needed / params.abs_capacity), n_density)
    n = min(n, fp.fleet_cap)

    pos = np.column_stack(
        [
            rng.uniform(0.0, scenario.area.width, n),
            rng.uniform(0.0, scenario.area.depth, n),
            np.full(n, bounds.h_min),
        ]
    )

    iterations = 0
    all_conv = True
    plane_h = bounds.h_min
    if field_users.shape[0] == 0:
        flags.append(FLAG_EMPTY_FIELD)
    else:
        pos, it, conv = run_equilibrium(
            pos, field_users, params.abs_capacity, fp, plane=True, trace=trace, phase="plane"
        )
        iterations += it
        all_conv &= conv

        while True:
            assoc = nearest_feasible_association(users, _fleet_sites(scenario, pos, params), params)
            if assoc.covered_count >= target:
                break
            if n >= fp.fleet_cap:
                flags.append(FLAG_FLEET_CAP)
                break
            # reinforcements drop onto a random uncovered user rather than
            # anywhere in the area: same seeded randomness, far less travel
            assigned = np.fromiter(assoc.assignments.keys(), dtype=int, count=len(assoc.assignments))
            uncovered = field_idx[~np.isin(field_idx, assigned)]
            if uncovered.size:
                u = users[rng.choice(uncovered)]
                extra = np.array([[u[0], u[1], bounds.h_min]])
            else:
                extra = np.array(
                    [[rng.uniform(0.0, scenario.area.width), rng.uniform(0.0, scenario.area.depth), bounds.h_min]]
                )
            pos = np.vstack([pos, extra])
            n += 1
            pos, it, conv = run_equilibrium(
                pos, field_users, params.abs_capacity, fp, plane=True, trace=trace, phase="grow"
            )
            iterations += it
            all_conv &= conv

        plane_h, pos, _ = plane_height_search(pos, field_users, bounds, params, fp, trace=trace)
        claims, _, _ = associate_and_charge(pos, field_users, params.abs_capacity, fp.charge_scale)
        pos, vflags = vertical_refine(pos, claims, bounds, field_users, params, fp)
        flags.extend(vflags)
        pos, it, conv = run_equilibrium(
            pos,
            field_users,
            params.abs_capacity,
            fp,
            z_bounds=(bounds.h_min, bounds.h_max),
            plane=False,
            trace=trace,
            phase="free3d",
        )
        iterations += it
        all_conv &= conv

    if not all_conv:
        flags.append(FLAG_NO_EQUILIBRIUM)

    sites = _fleet_sites(scenario, pos, params)
    assoc = nearest_feasible_association(users, sites, params)
    if assoc.covered_count < target:
        flags.append(FLAG_UNMET_TARGET)
    placement = Placement(sites=sites, assoc=assoc)
    info = Force3dInfo(
        fleet_size=n,
        plane_height=plane_h,
        bounds=bounds,
        iterations=iterations,
        converged=all_conv,
        flags=tuple(flags),
    )
    return placement, info
