"""Exact placement on a discrete candidate grid.

The placement problem picks a subset of candidate aerial sites (binary open
variables) and a user assignment that maximizes total received power while
covering at least the target fraction of users, with per-site capacities and
a per-open-site penalty. It is solved exactly: subsets are enumerated in
order of increasing cardinality with an admissible pruning bound, and the
inner assignment is a min-cost flow (successive shortest paths). Received
power per assignment is strictly positive, so total power is concave in the
flow value and the optimum over all coverage counts >= the floor appears
along the augmentation sequence; augmentation stops at the first
nonnegative-cost path once the floor is met.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .channel import ChannelParams, min_rx_power
from .coverage import Association, Placement, Site, coverage_target, rx_power_matrix
from .scenario import AreaSpec, Point3, Scenario


class EnumerationCapError(RuntimeError):
    """Candidate set too large for exhaustive enumeration."""


@dataclass(frozen=True)
class CandidateGrid:
    """Candidate aerial sites: a square lattice per height layer.

    Column ids in the optimization are 1-based (0 is the terrestrial BS),
    so grid site i sits at ``sites[i - 1]``.
    """

    sites: tuple[Point3, ...]
    layers: tuple[float, ...]
    spacing: float

    @property
    def n_sites(self) -> int:
        return len(self.sites)


def build_grid(area: AreaSpec, layers: list[float], per_layer_count: int) -> CandidateGrid:
    """Cell-centered m x m lattice per layer, m = floor(sqrt(per_layer_count)).

    Iteration order is y-major (x varies fastest), layers in the given order.
    """
    if per_layer_count < 1:
        raise ValueError("per_layer_count must be >= 1")
    if not layers:
        raise ValueError("at least one height layer required")
    if any(h <= 0 for h in layers):
        raise ValueError("layer heights must be positive")
    m = int(math.isqrt(per_layer_count))
    sites = []
    for h in layers:
        for iy in range(m):
            for ix in range(m):
                sites.append(
                    Point3((ix + 0.5) * area.width / m, (iy + 0.5) * area.depth / m, float(h))
                )
    return CandidateGrid(sites=tuple(sites), layers=tuple(float(h) for h in layers), spacing=area.width / m)


@dataclass
class MilpInstance:
    """Dense problem data: column 0 is the terrestrial BS (all-zero when the
    scenario has none), columns 1..n the grid sites."""

    k_total: int
    n_sites: int
    p_matrix: np.ndarray          # (K, n+1) received powers
    eligible: np.ndarray          # (K, n+1) SNR eligibility mask
    capacities: np.ndarray        # (n+1,) per-column user capacity
    site_distances: np.ndarray    # (K, n+1) 3D user-site distances
    lambda_weight: float
    beta: float
    sites: list[Site | None]      # index = column id; [0] is None without a TBS

    @property
    def coverage_floor(self) -> int:
        return coverage_target(self.k_total, self.beta)


def default_lambda(p_matrix: np.ndarray, eligible: np.ndarray, k_total: int) -> float:
    """Site penalty weight that makes opening a site never pay for itself:
    lambda * K_T strictly exceeds the largest single-column power sum."""
    if k_total == 0:
        return 1.0
    col_sums = (p_matrix * eligible).sum(axis=0)
    top = float(col_sums.max()) if col_sums.size else 0.0
    if top <= 0.0:
        return 1.0
    return 1.05 * top / k_total


def build_instance(
    scenario: Scenario,
    grid: CandidateGrid,
    params: ChannelParams,
    beta: float = 0.05,
    lambda_weight: float | None = None,
) -> MilpInstance:
    if len(scenario.tbs) > 1:
        raise ValueError("instances support at most one terrestrial BS")
    k = scenario.k_total
    n = grid.n_sites

    sites: list[Site | None] = [None] * (n + 1)
    cols: list[Site] = []
    if scenario.tbs:
        sites[0] = Site(id=0, kind="tbs", position=scenario.tbs[0], capacity=params.tbs_capacity)
        cols.append(sites[0])
    for i, pos in enumerate(grid.sites, start=1):
        sites[i] = Site(id=i, kind="abs", position=pos, capacity=params.abs_capacity)
        cols.append(sites[i])

    users = scenario.user_array()
    p = np.zeros((k, n + 1))
    dist = np.full((k, n + 1), np.inf)
    if cols:
        mat = rx_power_matrix(users, cols, params)
        for j, site in enumerate(cols):
            p[:, site.id] = mat[:, j]
            sp = site.position
            dist[:, site.id] = np.sqrt(
                (users[:, 0] - sp.x) ** 2 + (users[:, 1] - sp.y) ** 2 + (users[:, 2] - sp.z) ** 2
            )
    eligible = p >= min_rx_power(params)
    capacities = np.zeros(n + 1, dtype=int)
    capacities[0] = params.tbs_capacity if scenario.tbs else 0
    capacities[1:] = params.abs_capacity

    lam = default_lambda(p, eligible, k) if lambda_weight is None else float(lambda_weight)
    return MilpInstance(
        k_total=k,
        n_sites=n,
        p_matrix=p,
        eligible=eligible,
        capacities=capacities,
        site_distances=dist,
        lambda_weight=lam,
        beta=beta,
        sites=sites,
    )


@dataclass
class AssignmentResult:
    assoc: Association
    total_power: float
    coverage: int
    feasible: bool


class _MinCostFlow:
    """Successive shortest paths with potentials on a fixed node numbering:
    0 = source, 1..K = users, then site columns, last = sink. The zero-flow
    network is a DAG in that order, which seeds the potentials without a
    Bellman-Ford pass."""

    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.head: list[list[int]] = [[] for _ in range(n_nodes)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []

    def add_edge(self, u: int, v: int, cap: int, cost: float) -> None:
        self.head[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.head[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(0)
        self.cost.append(-cost)

    def _init_potentials(self) -> list[float]:
        dist = [math.inf] * self.n
        dist[0] = 0.0
        for u in range(self.n):  # node ids are already topological
            if math.isinf(dist[u]):
                continue
            for e in self.head[u]:
                if self.cap[e] > 0 and self.to[e] > u:
                    v = self.to[e]
                    nd = dist[u] + self.cost[e]
                    if nd < dist[v]:
                        dist[v] = nd
        return dist

    def _dag_parents(self) -> list[int]:
        """Shortest-path tree at zero flow (forward arcs only, one pass)."""
        parent = [-1] * self.n
        seen = [math.inf] * self.n
        seen[0] = 0.0
        for u in range(self.n):
            if math.isinf(seen[u]):
                continue
            for e in self.head[u]:
                if self.cap[e] > 0 and self.to[e] > u:
                    v = self.to[e]
                    nd = seen[u] + self.cost[e]
                    if nd < seen[v]:
                        seen[v] = nd
                        parent[v] = e
        return parent

    def _dijkstra(self, pi: list[float], src: int):
        dist = [math.inf] * self.n
        parent_edge = [-1] * self.n
        dist[src] = 0.0
        pq = [(0.0, src)]
        while pq:
            d, u = heapq.heappop(pq)
            if d > dist[u]:
                continue
            for e in self.head[u]:
                if self.cap[e] <= 0:
                    continue
                v = self.to[e]
                if math.isinf(pi[v]):
                    continue  # never reachable; keeps reduced costs finite
                rc = self.cost[e] + pi[u] - pi[v]
                if rc < 0.0:
                    rc = 0.0  # float slack only; true reduced costs are >= 0
                nd = d + rc
                if nd < dist[v]:
                    dist[v] = nd
                    parent_edge[v] = e
                    heapq.heappush(pq, (nd, v))
        return dist, parent_edge

    def run(self, src: int, dst: int, floor: int) -> tuple[int, list[int]]:
        """Augment unit paths until the floor is met and the next path would
        not increase total power. Returns (flow value, per-edge flows).

        Marginal path costs are nondecreasing along the augmentation
        sequence, so stopping at the first nonnegative one (once the floor
        holds) leaves the flow at the power optimum over all values >= floor.
        """
        flows = [0] * len(self.to)
        pi = self._init_potentials()
        parent = self._dag_parents()
        f = 0
        while parent[dst] != -1:
            path = []
            v = dst
            while v != src:
                e = parent[v]
                path.append(e)
                v = self.to[e ^ 1]
            true_cost = sum(self.cost[e] for e in path)
            if f >= floor and true_cost >= 0.0:
                break
            for e in path:
                self.cap[e] -= 1
                self.cap[e ^ 1] += 1
                flows[e] += 1
                flows[e ^ 1] -= 1
            f += 1
            dist, parent = self._dijkstra(pi, src)
            if math.isinf(dist[dst]):
                break
            pi = [p + d if not math.isinf(d) else p for p, d in zip(pi, dist)]
        return f, flows


def optimal_assignment(instance: MilpInstance, chosen: tuple[int, ...]) -> AssignmentResult:
    """Power-maximal assignment of users to the terrestrial BS plus the chosen
    grid columns, subject to capacities and the coverage floor. Infeasible
    instances come back with the best coverage the flow can reach."""
    floor = instance.coverage_floor
    cols = ([0] if instance.sites[0] is not None else []) + sorted(chosen)
    k = instance.k_total

    # Drop users/sites with no eligible edge; they cannot carry flow.
    elig = instance.eligible
    usable_users = [u for u in range(k) if any(elig[u, c] for c in cols)]
    usable_cols = [c for c in cols if elig[:, c].any()]

    n_nodes = 2 + len(usable_users) + len(usable_cols)
    g = _MinCostFlow(n_nodes)
    src, dst = 0, n_nodes - 1
    user_node = {u: 1 + i for i, u in enumerate(usable_users)}
    col_node = {c: 1 + len(usable_users) + j for j, c in enumerate(usable_cols)}
    for u in usable_users:
        g.add_edge(src, user_node[u], 1, 0.0)
    for u in usable_users:
        for c in usable_cols:
            if elig[u, c]:
                g.add_edge(user_node[u], col_node[c], 1, -float(instance.p_matrix[u, c]))
    for c in usable_cols:
        g.add_edge(col_node[c], dst, int(instance.capacities[c]), 0.0)

    f, flows = g.run(src, dst, floor)

    assoc = Association()
    for u in usable_users:
        un = user_node[u]
        for e in g.head[un]:
            if flows[e] > 0 and g.to[e] != src:
                node = g.to[e]
                col = usable_cols[node - 1 - len(usable_users)]
                assoc.assign(u, col)
    total_power = float(sum(instance.p_matrix[u, c] for u, c in assoc.assignments.items()))
    return AssignmentResult(assoc=assoc, total_power=total_power, coverage=f, feasible=f >= floor)


@dataclass
class ExactSolution:
    chosen_sites: tuple[int, ...]
    assoc: Association
    objective: float
    optimal: bool
    feasible: bool = True
    coverage: int = 0


def objective_value(instance: MilpInstance, chosen: tuple[int, ...], assoc: Association) -> float:
    """Site penalty minus assigned power: lambda * K_T * |chosen| - sum P."""
    power = sum(instance.p_matrix[u, c] for u, c in assoc.assignments.items())
    return instance.lambda_weight * instance.k_total * len(chosen) - float(power)


def solve_exact(instance: MilpInstance, enumeration_cap: int = 24) -> ExactSolution:
    """Global minimizer by cardinality-first subset enumeration.

    Cardinality m is abandoned once lambda * K_T * m exceeds the incumbent
    plus the largest power sum any assignment could reach (each user served
    by its best eligible column); a per-subset version of the same bound
    skips hopeless subsets. Ties on the objective keep the lexicographically
    smallest site tuple.
    """
    n = instance.n_sites
    if n > enumeration_cap:
        raise EnumerationCapError(f"{n} candidate sites exceed the enumeration cap {enumeration_cap}")

    lam_kt = instance.lambda_weight * instance.k_total
    p_elig = np.where(instance.eligible, instance.p_matrix, 0.0)
    ub_global = float(np.max(p_elig, axis=1).sum()) if instance.k_total else 0.0
    tbs_col = p_elig[:, 0]

    best_obj = math.inf
    best_subset: tuple[int, ...] | None = None
    best_res: AssignmentResult | None = None

    for m in range(n + 1):
        if best_subset is not None and lam_kt * m - ub_global > best_obj:
            break
        for subset in combinations(range(1, n + 1), m):
            if best_subset is not None:
                if subset:
                    ub = float(np.maximum(p_elig[:, list(subset)].max(axis=1), tbs_col).sum())
                else:
                    ub = float(tbs_col.sum())
                if lam_kt * m - ub > best_obj:
                    continue
            res = optimal_assignment(instance, subset)
            if not res.feasible:
                continue
            obj = lam_kt * m - res.total_power
            if obj < best_obj or (obj == best_obj and best_subset is not None and subset < best_subset):
                best_obj = obj
                best_subset = subset
                best_res = res

    if best_subset is None:
        full = tuple(range(1, n + 1))
        res = optimal_assignment(instance, full)
        return ExactSolution(
            chosen_sites=full,
            assoc=res.assoc,
            objective=lam_kt * n - res.total_power,
            optimal=False,
            feasible=False,
            coverage=res.coverage,
        )
    return ExactSolution(
        chosen_sites=best_subset,
        assoc=best_res.assoc,
        objective=best_obj,
        optimal=True,
        feasible=True,
        coverage=best_res.coverage,
    )


def placement_from_solution(instance: MilpInstance, sol: ExactSolution) -> Placement:
    sites = []
    if instance.sites[0] is not None:
        sites.append(instance.sites[0])
    sites.extend(instance.sites[c] for c in sol.chosen_sites)
    return Placement(sites=sites, assoc=sol.assoc)
