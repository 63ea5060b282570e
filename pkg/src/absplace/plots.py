"""Figure rendering for sweeps, placements, and the height/radius profile.

Always uses the Agg backend; every function writes a file and returns its
path, nothing is shown interactively.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .channel import ChannelParams, coverage_radius
from .coverage import KIND_ABS, KIND_TBS, Placement
from .force3d import HeightBounds
from .scenario import Scenario

METRIC_LABELS = {
    "abs_count": "deployed aerial BSs",
    "avg_rate_covered_bps": "mean rate, covered users (bit/s)",
    "avg_rate_all_bps": "mean rate, all users (bit/s)",
    "outage": "outage fraction",
    "runtime_s": "solve runtime (s)",
}

SWEEP_LABELS = {
    "n_candidate_sites": "candidate sites",
    "k_total": "users",
    "height": "flight height (m)",
    "n_users_hotspot": "users (hotspot)",
}


def sweep_figures(summaries: list[dict], out_dir: str | Path, stem: str = "sweep") -> list[Path]:
    """One figure per metric: mean with a 95% CI band, one line per
    algorithm."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    if not summaries:
        return paths
    sweep_var = summaries[0]["sweep_var"]
    algos = sorted({s["algorithm"] for s in summaries})
    for metric, label in METRIC_LABELS.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        for algo in algos:
            pts = sorted((s["sweep_value"], s[f"{metric}_mean"], s[f"{metric}_ci95"])
                         for s in summaries if s["algorithm"] == algo)
            x = np.array([p[0] for p in pts])
            y = np.array([p[1] for p in pts])
            ci = np.array([p[2] for p in pts])
            ax.errorbar(x, y, yerr=ci, marker="o", capsize=3, label=algo)
        ax.set_xlabel(SWEEP_LABELS.get(sweep_var, sweep_var))
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{stem}_{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    return paths


def radius_profile_figure(
    params: ChannelParams,
    out_path: str | Path,
    scan_max_m: float = 150.0,
    bounds: HeightBounds | None = None,
) -> Path:
    heights = np.arange(1.0, scan_max_m + 0.5, 1.0)
    radii = [coverage_radius(float(h), params) for h in heights]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(heights, radii)
    if bounds is not None:
        ax.axvline(bounds.h_min, color="tab:green", ls="--", label=f"h_min = {bounds.h_min:g} m")
        ax.axvline(bounds.h_max, color="tab:red", ls="--", label=f"h_max = {bounds.h_max:g} m")
        ax.legend()
    ax.set_xlabel("flight height (m)")
    ax.set_ylabel("eligibility radius (m)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def placement_figure(scenario: Scenario, placement: Placement, out_path: str | Path) -> Path:
    """Top-down view: users, assignment links, BS positions (aerial ones
    annotated with height)."""
    users = scenario.user_array()
    fig, ax = plt.subplots(figsize=(6, 6))
    by_id = {s.id: s for s in placement.sites}
    for user, sid in placement.assoc.assignments.items():
        s = by_id[sid]
        ax.plot([users[user, 0], s.position.x], [users[user, 1], s.position.y],
                color="0.8", lw=0.5, zorder=1)
    ax.scatter(users[:, 0], users[:, 1], s=12, color="0.4", label="users", zorder=2)
    for s in placement.sites:
        if s.kind == KIND_TBS:
            ax.scatter([s.position.x], [s.position.y], marker="s", s=90,
                       color="tab:blue", zorder=3)
        else:
            ax.scatter([s.position.x], [s.position.y], marker="^", s=70,
                       color="tab:red", zorder=3)
            ax.annotate(f"{s.position.z:.0f} m", (s.position.x, s.position.y),
                        textcoords="offset points", xytext=(4, 4), fontsize=7)
    ax.scatter([], [], marker="s", s=90, color="tab:blue", label="terrestrial BS")
    ax.scatter([], [], marker="^", s=70, color="tab:red", label="aerial BS")
    ax.set_xlim(0, scenario.area.width)
    ax.set_ylim(0, scenario.area.depth)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
