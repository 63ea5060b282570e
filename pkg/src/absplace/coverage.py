"""Sites, user associations, and placement evaluation.

An Association maps user index -> site id (one site per user; unassigned
users are simply absent). Coverage targets, feasibility checks, and the
nearest-eligible assignment rule used by several solvers all live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    ChannelParams,
    abs_received_power,
    min_rx_power,
    received_power,
    tbs_received_power,
    user_bit_rate,
)
from .scenario import Point3, Scenario

KIND_TBS = "tbs"
KIND_ABS = "abs"


@dataclass(frozen=True)
class Site:
    id: int
    kind: str
    position: Point3
    capacity: int

    def __post_init__(self):
        if self.kind not in (KIND_TBS, KIND_ABS):
            raise ValueError(f"unknown site kind {self.kind!r}")
        if self.capacity < 0:
            raise ValueError("capacity must be >= 0")


@dataclass
class Association:
    assignments: dict[int, int] = field(default_factory=dict)

    def assign(self, user_idx: int, site_id: int) -> None:
        self.assignments[user_idx] = site_id

    def load(self, site_id: int) -> int:
        return sum(1 for s in self.assignments.values() if s == site_id)

    @property
    def loads(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for s in self.assignments.values():
            out[s] = out.get(s, 0) + 1
        return out

    @property
    def covered_count(self) -> int:
        return len(self.assignments)


@dataclass
class Placement:
    """A deployed set of sites plus who they serve."""

    sites: list[Site]
    assoc: Association

    @property
    def abs_count(self) -> int:
        return sum(1 for s in self.sites if s.kind == KIND_ABS)


@dataclass
class EvalReport:
    covered_count: int
    outage_fraction: float
    avg_rate_covered_bps: float   # mean over covered users (0 if none, flagged)
    avg_rate_all_bps: float       # mean over all users, uncovered contribute 0
    abs_count: int
    total_rx_power_w: float
    runtime_s: float = 0.0
    flags: tuple[str, ...] = ()


def coverage_target(k_total: int, beta: float) -> int:
    """Minimum covered-user count for outage tolerance beta."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    return math.ceil((1.0 - beta) * k_total - 1e-9)


def rx_power_matrix(users_xyz: np.ndarray, sites: list[Site], params: ChannelParams) -> np.ndarray:
    """(K, S) received powers, one column per site in list order."""
    k = users_xyz.shape[0]
    out = np.zeros((k, len(sites)))
    for j, site in enumerate(sites):
        p = site.position
        dx = users_xyz[:, 0] - p.x
        dy = users_xyz[:, 1] - p.y
        if site.kind == KIND_TBS:
            dz = users_xyz[:, 2] - p.z
            d = np.sqrt(dx * dx + dy * dy + dz * dz)
            out[:, j] = tbs_received_power(d, params)
        else:
            h = p.z - users_xyz[:, 2]
            r = np.hypot(dx, dy)
            out[:, j] = abs_received_power(h, r, params)
    return out


def evaluate(scenario: Scenario, sites: list[Site], assoc: Association, params: ChannelParams) -> EvalReport:
    """Score a placement. Rates are per-user Shannon rates at the assigned
    site; the covered average is the headline metric, the all-user average
    counts outage users as zero."""
    by_id = {s.id: s for s in sites}
    k_total = scenario.k_total
    total_p = 0.0
    rate_sum = 0.0
    flags: list[str] = []
    for user_idx, site_id in assoc.assignments.items():
        site = by_id[site_id]
        p_rx = received_power(scenario.users[user_idx], site, params)
        total_p += p_rx
        rate_sum += user_bit_rate(p_rx, params)

    covered = assoc.covered_count
    if covered:
        avg_covered = rate_sum / covered
    else:
        avg_covered = 0.0
        flags.append("no_covered_users")
    avg_all = rate_sum / k_total if k_total else 0.0
    outage = 1.0 - covered / k_total if k_total else 0.0
    return EvalReport(
        covered_count=covered,
        outage_fraction=outage,
        avg_rate_covered_bps=avg_covered,
        avg_rate_all_bps=avg_all,
        abs_count=sum(1 for s in sites if s.kind == KIND_ABS),
        total_rx_power_w=total_p,
        flags=tuple(flags),
    )


def feasibility_check(
    scenario: Scenario,
    sites: list[Site],
    assoc: Association,
    params: ChannelParams,
    beta: float,
) -> list[str]:
    """Return human-readable constraint violations; empty list means feasible."""
    violations: list[str] = []
    by_id = {s.id: s for s in sites}
    thr = min_rx_power(params)

    for user_idx, site_id in assoc.assignments.items():
        if site_id not in by_id:
            violations.append(f"user {user_idx} assigned to unknown site {site_id}")
            continue
        if not 0 <= user_idx < scenario.k_total:
            violations.append(f"assignment references unknown user {user_idx}")
            continue
        p_rx = received_power(scenario.users[user_idx], by_id[site_id], params)
        if p_rx < thr:
            violations.append(
                f"user {user_idx} at site {site_id} below SNR threshold ({p_rx:.3e} < {thr:.3e} W)"
            )

    for site_id, load in assoc.loads.items():
        site = by_id.get(site_id)
        if site is not None and load > site.capacity:
            violations.append(f"site {site_id} overloaded: {load} > {site.capacity}")

    target = coverage_target(scenario.k_total, beta)
    if assoc.covered_count < target:
        violations.append(f"coverage {assoc.covered_count} below target {target}")
    return violations


def nearest_feasible_association(
    users_xyz: np.ndarray, sites: list[Site], params: ChannelParams
) -> Association:
    """Assign users (in index order) to the nearest SNR-eligible site with
    spare capacity; ties go to the lowest site id; users with no feasible
    site stay unassigned."""
    assoc = Association()
    if users_xyz.shape[0] == 0 or not sites:
        return assoc
    order = sorted(range(len(sites)), key=lambda j: sites[j].id)
    sites_sorted = [sites[j] for j in order]
    powers = rx_power_matrix(users_xyz, sites_sorted, params)
    eligible = powers >= min_rx_power(params)
    pos = np.array([[s.position.x, s.position.y, s.position.z] for s in sites_sorted])
    diff = users_xyz[:, None, :] - pos[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    remaining = np.array([s.capacity for s in sites_sorted], dtype=int)

    for k in range(users_xyz.shape[0]):
        usable = eligible[k] & (remaining > 0)
        if not usable.any():
            continue
        d = np.where(usable, dist[k], np.inf)
        j = int(np.argmin(d))  # first minimum = lowest site id on ties
        assoc.assign(k, sites_sorted[j].id)
        remaining[j] -= 1
    return assoc
