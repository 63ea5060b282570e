"""Command-line front end.

    absplace solve    --config cfg.json --algorithm force3d [--seed N] [--out sol.json]
                      [--trace trace.csv] [--plot placement.png]
    absplace sweep    --config cfg.json [--out results.csv] [--workers N] [--plot]
    absplace bounds   --config cfg.json [--fleet N] [--out bounds.json] [--plot profile.png]
    absplace validate [--seed N]

`sweep` writes the results CSV named in the config (or --out), a *_summary.csv
aggregate, and a *_meta.json sidecar with the config echo, per-cell lambda
calibrations, and any skipped cells.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

from .coverage import coverage_target, evaluate
from .force3d import height_bounds
from .harness import (
    ALGORITHMS,
    GRID_ALGOS,
    ConfigError,
    cell_setup,
    load_config,
    run_algorithm,
    run_experiment,
    summarize,
    write_rows,
    write_summary,
)
from .validate import run_all

log = logging.getLogger(__name__)


def cmd_solve(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.algorithm in GRID_ALGOS and not config.scenario.grid_layers:
        raise ConfigError(f"{args.algorithm} needs scenario.grid in the config")
    config = replace(config, algorithms=(args.algorithm,))
    seed = args.seed if args.seed is not None else config.base_seed

    scenario, grid, _ = cell_setup(config, None, seed)
    trace: list | None = [] if args.trace else None
    t0 = time.perf_counter()
    placement, flags, extra = run_algorithm(args.algorithm, scenario, grid, config, trace=trace)
    runtime = time.perf_counter() - t0
    report = evaluate(scenario, placement.sites, placement.assoc, config.channel)

    doc = {
        "algorithm": args.algorithm,
        "seed": seed,
        "beta": config.beta,
        "k_total": scenario.k_total,
        "coverage_target": coverage_target(scenario.k_total, config.beta),
        "sites": [
            {
                "id": s.id,
                "kind": s.kind,
                "x": s.position.x,
                "y": s.position.y,
                "z": s.position.z,
                "capacity": s.capacity,
            }
            for s in placement.sites
        ],
        "assignments": sorted(placement.assoc.assignments.items()),
        "metrics": {
            "covered_count": report.covered_count,
            "outage": report.outage_fraction,
            "avg_rate_covered_bps": report.avg_rate_covered_bps,
            "avg_rate_all_bps": report.avg_rate_all_bps,
            "abs_count": report.abs_count,
            "total_rx_power_w": report.total_rx_power_w,
            "runtime_s": runtime,
        },
        "flags": list(flags) + list(report.flags),
    }
    for key in ("lambda", "objective", "fleet_size", "plane_height"):
        if key in extra:
            doc[key] = extra[key]

    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"solution written to {args.out}")
    else:
        print(text)

    if args.trace:
        with open(args.trace, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["phase", "iteration", "abs_index", "x", "y", "z"])
            for row in trace or ():
                w.writerow(row)
        if not trace:
            log.warning("only force3d emits trajectory rows; %s holds just the header", args.trace)
        else:
            print(f"trajectory written to {args.trace}")

    if args.plot:
        from .plots import placement_figure

        print(f"placement figure written to {placement_figure(scenario, placement, args.plot)}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    out = Path(args.out) if args.out else Path(config.output)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)

    rows, meta = run_experiment(config, workers=args.workers)
    write_rows(out, rows)
    summaries = summarize(rows)
    summary_path = Path(args.summary) if args.summary else out.with_name(out.stem + "_summary.csv")
    write_summary(summary_path, summaries)

    meta_doc = {
        "config": json.loads(Path(args.config).read_text()),
        "workers": args.workers,
        "lambda": meta["lambda"],
        "skipped": meta["skipped"],
    }
    meta_path = out.with_name(out.stem + "_meta.json")
    meta_path.write_text(json.dumps(meta_doc, indent=2) + "\n")

    print(f"{len(rows)} rows -> {out}")
    print(f"summary -> {summary_path}")
    print(f"meta -> {meta_path}")
    if meta["skipped"]:
        print(f"{len(meta['skipped'])} cell(s) skipped; see meta for reasons")
    if args.plot:
        from .plots import sweep_figures

        for p in sweep_figures(summaries, out.parent, stem=out.stem):
            print(f"figure -> {p}")
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    sc = config.scenario
    if args.fleet is not None:
        fleet = args.fleet
    else:
        target = coverage_target(sc.k_total, config.beta)
        fleet = max(1, math.ceil(target / config.channel.abs_capacity))
    bounds = height_bounds(sc.area, fleet, config.channel)
    print(f"fleet={fleet} h_min={bounds.h_min:g} h_max={bounds.h_max:g}")

    if args.out:
        Path(args.out).write_text(
            json.dumps({"fleet": fleet, "h_min": bounds.h_min, "h_max": bounds.h_max}, indent=2) + "\n"
        )
    if args.plot:
        from .plots import radius_profile_figure

        print(f"profile figure written to {radius_profile_figure(config.channel, args.plot, bounds=bounds)}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    results = run_all(seed=args.seed)
    failures = 0
    for name, ok, detail in results:
        print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
        failures += 0 if ok else 1
    if failures:
        print(f"{failures} invariant(s) failed", file=sys.stderr)
        return 1
    print(f"all {len(results)} invariants hold")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="absplace", description="aerial base station placement toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one algorithm on the configured scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    p.add_argument("--seed", type=int, default=None, help="scenario seed (default: base_seed)")
    p.add_argument("--out", default=None, help="solution JSON path (default: stdout)")
    p.add_argument("--trace", default=None, help="CSV of per-iteration positions (force3d)")
    p.add_argument("--plot", default=None, help="placement figure path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run the configured sweep across trials")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="results CSV (default: config output)")
    p.add_argument("--summary", default=None, help="summary CSV (default: <out>_summary.csv)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--plot", action="store_true", help="render metric figures next to the CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", help="flight height bounds for a fleet size")
    p.add_argument("--config", required=True)
    p.add_argument("--fleet", type=int, default=None, help="fleet size (default: capacity bound)")
    p.add_argument("--out", default=None, help="bounds JSON path")
    p.add_argument("--plot", default=None, help="radius profile figure path")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("validate", help="run the runtime invariant suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
