"""Experiment harness: config documents, sweep execution, delimited results.

A config JSON document drives everything. Top-level keys: scenario, channel,
algorithms, sweep, trials, base_seed, beta, lambda, output. `beta` is
required on purpose; there is no silent default at this level. Trial t of a
sweep cell uses seed base_seed + t, rows are sorted by (algorithm,
sweep_value, seed), and reruns are byte-identical except the runtime_s
column.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

import numpy as np

from .baselines import MODE_2D, MODE_3D, SpiralParams, spiral_solve
from .channel import ChannelParams
from .coverage import EvalReport, Placement, evaluate
from .exact import (
    CandidateGrid,
    EnumerationCapError,
    build_grid,
    build_instance,
    placement_from_solution,
    solve_exact,
)
from .force3d import ForceParams, force3d_solve
from .greedy import GreedyParams, greedy_solve
from .scenario import AreaSpec, DistributionSpec, Point3, Scenario, default_tbs, generate_scenario

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


SWEEP_VARS = ("n_candidate_sites", "k_total", "height", "n_users_hotspot")
ALGORITHMS = ("exact", "greedy", "force3d", "spiral2d", "spiral3d")
GRID_ALGOS = ("exact", "greedy")
FREE_HEIGHT_ALGOS = ("force3d", "spiral3d")

CSV_COLUMNS = [
    "algorithm",
    "sweep_var",
    "sweep_value",
    "seed",
    "abs_count",
    "avg_rate_covered_bps",
    "avg_rate_all_bps",
    "outage",
    "runtime_s",
    "flags",
]


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    area: AreaSpec
    k_total: int
    distribution: DistributionSpec
    tbs: tuple[Point3, ...] | None       # None = single TBS at the area center
    grid_layers: tuple[float, ...]
    grid_per_layer: int


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    channel: ChannelParams
    algorithms: tuple[str, ...]
    sweep: SweepSpec
    trials: int
    base_seed: int
    beta: float
    lambda_weight: float | None          # None = auto-calibrated per instance
    output: str
    enumeration_cap: int = 24
    solver_overrides: dict = field(default_factory=dict)


@dataclass
class ResultRow:
    algorithm: str
    sweep_var: str
    sweep_value: float
    seed: int
    abs_count: int
    avg_rate_covered_bps: float
    avg_rate_all_bps: float
    outage: float
    runtime_s: float
    flags: str = ""


def _build_channel(doc: dict) -> ChannelParams:
    known = {f.name for f in dc_fields(ChannelParams)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown channel keys: {sorted(unknown)}")
    return ChannelParams(**doc)


def parse_config(doc: dict) -> ExperimentConfig:
    for key in ("scenario", "algorithms", "sweep", "trials", "base_seed", "beta", "output"):
        if key not in doc:
            raise ConfigError(f"config key {key!r} is required")

    sc = doc["scenario"]
    if "area" not in sc or "k_total" not in sc:
        raise ConfigError("scenario requires 'area' and 'k_total'")
    area = AreaSpec(float(sc["area"]["width"]), float(sc["area"]["depth"]))
    dist_doc = sc.get("distribution", {"kind": "uniform"})
    dist = DistributionSpec(
        kind=dist_doc.get("kind", "uniform"),
        hotspot_count=int(dist_doc.get("hotspot_count", 2)),
        hotspot_stddev=float(dist_doc.get("hotspot_stddev", 5.0)),
        hotspot_fraction=float(dist_doc.get("hotspot_fraction", 1.0)),
    )
    tbs = None
    if "tbs" in sc:
        tbs = tuple(Point3(float(x), float(y), float(z)) for x, y, z in sc["tbs"])
    grid_doc = sc.get("grid", {})
    scenario_cfg = ScenarioConfig(
        area=area,
        k_total=int(sc["k_total"]),
        distribution=dist,
        tbs=tbs,
        grid_layers=tuple(float(h) for h in grid_doc.get("layers", ())),
        grid_per_layer=int(grid_doc.get("per_layer_count", 0)),
    )

    algorithms = tuple(doc["algorithms"])
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")

    sweep_doc = doc["sweep"]
    variable = sweep_doc.get("variable")
    if variable not in SWEEP_VARS:
        raise ConfigError(f"unknown sweep variable {variable!r}; choose from {SWEEP_VARS}")
    values = tuple(float(v) for v in sweep_doc.get("values", ()))
    if not values:
        raise ConfigError("sweep.values must be a non-empty list")

    if variable == "height" and any(a in FREE_HEIGHT_ALGOS for a in algorithms):
        raise ConfigError("height sweeps only apply to fixed-height algorithms (exact, greedy, spiral2d)")
    if variable == "n_users_hotspot" and dist.kind != "hotspot":
        raise ConfigError("n_users_hotspot sweeps require a hotspot distribution")
    if any(a in GRID_ALGOS for a in algorithms) and variable != "height":
        if not scenario_cfg.grid_layers or scenario_cfg.grid_per_layer < 1:
            raise ConfigError("exact/greedy need scenario.grid with 'layers' and 'per_layer_count'")
    if variable == "n_candidate_sites":
        n_layers = max(1, len(scenario_cfg.grid_layers))
        if any(int(v) < n_layers for v in values):
            raise ConfigError("n_candidate_sites values must allow at least one site per layer")

    trials = int(doc["trials"])
    if trials < 1:
        raise ConfigError("trials must be >= 1")

    beta = float(doc["beta"])
    if not 0.0 <= beta <= 1.0:
        raise ConfigError("beta must lie in [0, 1]")

    lam = doc.get("lambda")
    if isinstance(lam, str):
        if lam != "auto":
            raise ConfigError("lambda must be a number, null, or 'auto'")
        lam = None
    lam = None if lam is None else float(lam)

    return ExperimentConfig(
        scenario=scenario_cfg,
        channel=_build_channel(doc.get("channel", {})),
        algorithms=algorithms,
        sweep=SweepSpec(variable=variable, values=values),
        trials=trials,
        base_seed=int(doc["base_seed"]),
        beta=beta,
        lambda_weight=lam,
        output=str(doc["output"]),
        enumeration_cap=int(doc.get("enumeration_cap", 24)),
        solver_overrides=doc.get("solvers", {}),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    return parse_config(doc)


def cell_setup(
    config: ExperimentConfig, value: float | None, seed: int
) -> tuple[Scenario, CandidateGrid | None, list[str]]:
    """Materialize the scenario and (if needed) the candidate grid for one
    sweep cell. value=None leaves the swept variable at its configured base
    (used by single solves)."""
    sc = config.scenario
    var = config.sweep.variable
    flags: list[str] = []

    k_total = sc.k_total
    layers = sc.grid_layers
    per_layer = sc.grid_per_layer
    if value is not None:
        if var in ("k_total", "n_users_hotspot"):
            k_total = int(value)
        elif var == "height":
            layers = (float(value),)
            per_layer = sc.grid_per_layer if sc.grid_per_layer >= 1 else 1
        elif var == "n_candidate_sites":
            if not layers:
                raise ConfigError("n_candidate_sites sweeps need scenario.grid.layers")
            per_layer = int(value) // len(layers)

    tbs = list(sc.tbs) if sc.tbs is not None else default_tbs(sc.area)
    scenario = generate_scenario(sc.area, k_total, sc.distribution, tbs, seed)

    grid = None
    if any(a in GRID_ALGOS for a in config.algorithms):
        grid = build_grid(sc.area, list(layers), per_layer)
        if value is not None and var == "n_candidate_sites" and grid.n_sites != int(value):
            flags.append(f"nd={grid.n_sites}")
    return scenario, grid, flags


def _spiral_params(config: ExperimentConfig, value: float | None) -> SpiralParams:
    over = dict(config.solver_overrides.get("spiral", {}))
    if config.sweep.variable == "height" and value is not None:
        over["height_m"] = float(value)
    return SpiralParams(beta=config.beta, **over)


def run_algorithm(
    algorithm: str,
    scenario: Scenario,
    grid: CandidateGrid | None,
    config: ExperimentConfig,
    value: float | None = None,
    trace: list | None = None,
) -> tuple[Placement, tuple[str, ...], dict]:
    """Run one solver; returns placement, flags, and extra metadata (exact
    exposes the objective and the lambda actually used)."""
    extra: dict = {}
    if algorithm == "exact":
        instance = build_instance(
            scenario, grid, config.channel, beta=config.beta, lambda_weight=config.lambda_weight
        )
        cap = int(config.solver_overrides.get("exact", {}).get("enumeration_cap", config.enumeration_cap))
        sol = solve_exact(instance, enumeration_cap=cap)
        extra["lambda"] = instance.lambda_weight
        extra["objective"] = sol.objective
        flags = () if sol.feasible else ("infeasible",)
        return placement_from_solution(instance, sol), flags, extra
    if algorithm == "greedy":
        gp = GreedyParams(beta=config.beta, **config.solver_overrides.get("greedy", {}))
        placement, flags = greedy_solve(scenario, grid, config.channel, gp)
        return placement, flags, extra
    if algorithm == "force3d":
        fp = ForceParams(beta=config.beta, **config.solver_overrides.get("force3d", {}))
        placement, info = force3d_solve(scenario, config.channel, fp, trace=trace)
        extra["fleet_size"] = info.fleet_size
        extra["plane_height"] = info.plane_height
        return placement, info.flags, extra
    if algorithm == "spiral2d":
        placement, flags = spiral_solve(scenario, config.channel, _spiral_params(config, value), MODE_2D)
        return placement, flags, extra
    if algorithm == "spiral3d":
        placement, flags = spiral_solve(scenario, config.channel, _spiral_params(config, value), MODE_3D)
        return placement, flags, extra
    raise ConfigError(f"unknown algorithm {algorithm!r}")


def _run_cell(config: ExperimentConfig, value: float, trial: int) -> tuple[list[ResultRow], dict]:
    seed = config.base_seed + trial
    scenario, grid, cell_flags = cell_setup(config, value, seed)
    rows: list[ResultRow] = []
    meta: dict = {"skipped": [], "lambda": {}}
    for algorithm in config.algorithms:
        t0 = time.perf_counter()
        try:
            placement, flags, extra = run_algorithm(algorithm, scenario, grid, config, value)
        except EnumerationCapError as e:
            log.warning("skipping %s at %s=%s seed %d: %s", algorithm, config.sweep.variable, value, seed, e)
            meta["skipped"].append(
                {"algorithm": algorithm, "sweep_value": value, "seed": seed, "reason": str(e)}
            )
            continue
        runtime = time.perf_counter() - t0
        report = evaluate(scenario, placement.sites, placement.assoc, config.channel)
        if "lambda" in extra:
            meta["lambda"][f"{value}/{seed}"] = extra["lambda"]
        all_flags = list(cell_flags) + list(flags) + list(report.flags)
        rows.append(
            ResultRow(
                algorithm=algorithm,
                sweep_var=config.sweep.variable,
                sweep_value=float(value),
                seed=seed,
                abs_count=report.abs_count,
                avg_rate_covered_bps=report.avg_rate_covered_bps,
                avg_rate_all_bps=report.avg_rate_all_bps,
                outage=report.outage_fraction,
                runtime_s=runtime,
                flags=";".join(all_flags),
            )
        )
    return rows, meta


def _run_cell_star(args) -> tuple[list[ResultRow], dict]:
    return _run_cell(*args)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> tuple[list[ResultRow], dict]:
    """Execute the full sweep. Row order (and content, modulo runtime_s) is
    independent of the worker count."""
    cells = [(config, value, trial) for value in config.sweep.values for trial in range(config.trials)]
    results: list[tuple[list[ResultRow], dict]] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_star, cells))
    else:
        results = [_run_cell(*c) for c in cells]

    rows: list[ResultRow] = []
    meta: dict = {"skipped": [], "lambda": {}}
    for cell_rows, cell_meta in results:
        rows.extend(cell_rows)
        meta["skipped"].extend(cell_meta["skipped"])
        meta["lambda"].update(cell_meta["lambda"])
    rows.sort(key=lambda r: (r.algorithm, r.sweep_value, r.seed))
    return rows, meta


def _fmt(x: float) -> str:
    return repr(float(x))


def write_rows(path: str | Path, rows: list[ResultRow]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    r.algorithm,
                    r.sweep_var,
                    _fmt(r.sweep_value),
                    r.seed,
                    r.abs_count,
                    _fmt(r.avg_rate_covered_bps),
                    _fmt(r.avg_rate_all_bps),
                    _fmt(r.outage),
                    _fmt(r.runtime_s),
                    r.flags,
                ]
            )


def read_rows(path: str | Path) -> list[ResultRow]:
    rows: list[ResultRow] = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"unexpected result columns: {reader.fieldnames}")
        for rec in reader:
            rows.append(
                ResultRow(
                    algorithm=rec["algorithm"],
                    sweep_var=rec["sweep_var"],
                    sweep_value=float(rec["sweep_value"]),
                    seed=int(rec["seed"]),
                    abs_count=int(rec["abs_count"]),
                    avg_rate_covered_bps=float(rec["avg_rate_covered_bps"]),
                    avg_rate_all_bps=float(rec["avg_rate_all_bps"]),
                    outage=float(rec["outage"]),
                    runtime_s=float(rec["runtime_s"]),
                    flags=rec["flags"],
                )
            )
    return rows


SUMMARY_METRICS = ("abs_count", "avg_rate_covered_bps", "avg_rate_all_bps", "outage", "runtime_s")


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Per (algorithm, sweep_value) group: mean, sample stddev, and a 95%
    normal CI half-width for each metric. Single-trial groups report 0
    spread."""
    groups: dict[tuple[str, str, float], list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.algorithm, r.sweep_var, r.sweep_value), []).append(r)
    out = []
    for (algo, var, value), members in sorted(groups.items()):
        rec: dict = {"algorithm": algo, "sweep_var": var, "sweep_value": value, "n": len(members)}
        for metric in SUMMARY_METRICS:
            vals = np.array([getattr(m, metric) for m in members], dtype=float)
            mean = float(vals.mean())
            std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            rec[f"{metric}_mean"] = mean
            rec[f"{metric}_std"] = std
            rec[f"{metric}_ci95"] = 1.96 * std / math.sqrt(len(vals))
        out.append(rec)
    return out


def write_summary(path: str | Path, summaries: list[dict]) -> None:
    if not summaries:
        Path(path).write_text("")
        return
    cols = list(summaries[0].keys())
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for rec in summaries:
            w.writerow([rec[c] if isinstance(rec[c], (str, int)) else _fmt(rec[c]) for c in cols])
