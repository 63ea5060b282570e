"""Independent reference implementations the tests check the package against.

Everything here is deliberately naive: closed forms evaluated with mpmath at
50 digits, exhaustive enumerations, dynamic programs over explicit load
states, and O(n^2) double loops. Nothing borrows solver internals; only the
public data containers are used.
"""

from __future__ import annotations

import math
from itertools import combinations, product

import mpmath as mp
import numpy as np

mp.mp.dps = 50


# --- channel closed forms ---------------------------------------------------

def ref_tbs_received_power(distance_m, *, p_tx=20.0, ref_loss_db=-30.0, exponent=4.0, d0=1.0):
    """Reference power law: P / (kappa * (d/d0)^n), clamped at d0."""
    d = mp.mpf(max(distance_m, d0))
    kappa = mp.power(10, mp.mpf(ref_loss_db) / 10)
    return p_tx / (kappa * mp.power(d / d0, exponent))


def ref_los_probability(height_m, ground_range_m, *, a=9.61, b=0.16):
    if ground_range_m == 0.0:
        theta = mp.mpf(90)
    else:
        theta = mp.atan(mp.mpf(height_m) / mp.mpf(ground_range_m)) * 180 / mp.pi
    return 1 / (1 + a * mp.exp(-b * (theta - a)))


def ref_abs_path_loss_db(height_m, ground_range_m, *, f_hz=2.5e9, c=3.0e8,
                         eta_los=1.0, eta_nlos=20.0, a=9.61, b=0.16):
    d = mp.sqrt(mp.mpf(height_m) ** 2 + mp.mpf(ground_range_m) ** 2)
    fspl = 20 * mp.log10(4 * mp.pi * mp.mpf(f_hz) * d / mp.mpf(c))
    p_los = ref_los_probability(height_m, ground_range_m, a=a, b=b)
    return fspl + p_los * eta_los + (1 - p_los) * eta_nlos


def ref_abs_received_power(height_m, ground_range_m, *, p_tx=5.0, **kw):
    pl = ref_abs_path_loss_db(height_m, ground_range_m, **kw)
    return p_tx * mp.power(10, -pl / 10)


def ref_min_rx_power(*, noise_w=1e-6, min_snr_db=2.0):
    return mp.mpf(noise_w) * mp.power(10, mp.mpf(min_snr_db) / 10)


def ref_bit_rate(p_rx_w, *, bandwidth_hz=1e6, noise_w=1e-6):
    return mp.mpf(bandwidth_hz) * mp.log(1 + mp.mpf(p_rx_w) / noise_w, 2)


# --- assignment enumeration --------------------------------------------------

def enumerate_assignments(p_matrix, eligible, capacities, cols, floor):
    """Max total power over every assignment map with coverage >= floor.

    Walks all (len(cols)+1)^K maps (None = unassigned), keeping capacity
    and eligibility. Returns (best_power, max_coverage, feasible); when no
    map reaches the floor, best_power is None.
    """
    k = p_matrix.shape[0]
    best_power = None
    max_cov = 0
    options = [
        [None] + [c for c in cols if eligible[u, c]]
        for u in range(k)
    ]
    for combo in product(*options):
        loads: dict[int, int] = {}
        ok = True
        for c in combo:
            if c is None:
                continue
            loads[c] = loads.get(c, 0) + 1
            if loads[c] > capacities[c]:
                ok = False
                break
        if not ok:
            continue
        cov = sum(1 for c in combo if c is not None)
        max_cov = max(max_cov, cov)
        if cov < floor:
            continue
        power = sum(float(p_matrix[u, c]) for u, c in enumerate(combo) if c is not None)
        if best_power is None or power > best_power:
            best_power = power
    return best_power, max_cov, best_power is not None


def dp_assignment_power(p_matrix, eligible, capacities, cols, floor):
    """Same optimum as enumerate_assignments via a DP over load states.

    State: per-column load tuple -> best power so far; the covered count is
    simply sum(loads), so it stays out of the key. Explores the identical
    solution set, so it serves as the scalable half of a dual-route check
    (the naive walk validates it on micro instances).
    """
    caps = [int(capacities[c]) for c in cols]
    states: dict[tuple[int, ...], float] = {tuple([0] * len(cols)): 0.0}
    k = p_matrix.shape[0]
    for u in range(k):
        new: dict[tuple[int, ...], float] = {}
        for loads, power in states.items():
            cur = new.get(loads)
            if cur is None or power > cur:
                new[loads] = power
            for j, c in enumerate(cols):
                if eligible[u, c] and loads[j] < caps[j]:
                    l2 = list(loads)
                    l2[j] += 1
                    key = tuple(l2)
                    val = power + float(p_matrix[u, c])
                    cur = new.get(key)
                    if cur is None or val > cur:
                        new[key] = val
        states = new
    feasible = [power for loads, power in states.items() if sum(loads) >= floor]
    max_cov = max(sum(loads) for loads in states)
    if not feasible:
        return None, max_cov, False
    return max(feasible), max_cov, True


def brute_force_exact(instance, use_dp=True):
    """Global optimum of the site-selection objective by full enumeration.

    Iterates every subset of grid columns, solves the inner assignment with
    the load-state DP (or the naive walk), and minimizes
    lambda * K_T * |subset| - power. Ties prefer the lexicographically
    smallest subset. Returns (objective, subset) or (None, None) when no
    subset covers the floor.
    """
    solver = dp_assignment_power if use_dp else enumerate_assignments
    n = instance.n_sites
    floor = instance.coverage_floor
    lam_kt = instance.lambda_weight * instance.k_total
    has_tbs = instance.sites[0] is not None
    best = None
    best_subset = None
    for m in range(n + 1):
        for subset in combinations(range(1, n + 1), m):
            cols = ([0] if has_tbs else []) + list(subset)
            power, _cov, feasible = solver(
                instance.p_matrix, instance.eligible, instance.capacities, cols, floor
            )
            if not feasible:
                continue
            obj = lam_kt * m - power
            if best is None or obj < best - 1e-15 or (abs(obj - best) <= 1e-15 and subset < best_subset):
                best = obj
                best_subset = subset
    return best, best_subset


# --- force double loop --------------------------------------------------------

def force_field_reference(positions, charges, field_users, user_charge, softening_m=0.1, plane=False):
    """Net force on each BS by explicit double loops: pairwise repulsion from
    every other BS, attraction toward every field user; magnitude
    q_i*q_j / max(d^2, softening^2) along the separation direction;
    coincident pairs contribute nothing."""
    pos = np.asarray(positions, dtype=float)
    n = pos.shape[0]
    users = np.asarray(field_users, dtype=float)
    soft2 = softening_m * softening_m
    out = np.zeros((n, 3))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            delta = pos[i] - pos[j]
            d = math.sqrt(float(delta @ delta))
            if d == 0.0:
                continue
            mag = charges[i] * charges[j] / max(d * d, soft2)
            out[i] += mag * delta / d
        for u in range(users.shape[0]):
            delta = pos[i] - users[u]
            d = math.sqrt(float(delta @ delta))
            if d == 0.0:
                continue
            mag = -charges[i] * user_charge / max(d * d, soft2)
            out[i] += mag * delta / d
    if plane:
        out[:, 2] = 0.0
    return out


def claim_reference(dist, capacity):
    """Sequential nearest-available claiming by explicit sorting: BS order is
    row order; per row, users sort by (distance, user index)."""
    n, k = dist.shape
    available = [True] * k
    claims = []
    for i in range(n):
        ranked = sorted(range(k), key=lambda u: (dist[i, u], u))
        take = [u for u in ranked if available[u]][:capacity]
        for u in take:
            available[u] = False
        claims.append(take)
    return claims
