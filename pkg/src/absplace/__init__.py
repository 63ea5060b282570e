"""Aerial base station placement: channel model, exact and heuristic
solvers, and an experiment harness."""

from .baselines import MODE_2D, MODE_3D, SpiralParams, spiral_solve
from .channel import (
    ChannelParams,
    abs_path_loss_db,
    abs_received_power,
    coverage_radius,
    los_probability,
    min_rx_power,
    received_power,
    snr_eligible,
    tbs_path_loss,
    tbs_received_power,
    user_bit_rate,
)
from .coverage import (
    Association,
    EvalReport,
    Placement,
    Site,
    coverage_target,
    evaluate,
    feasibility_check,
    nearest_feasible_association,
    rx_power_matrix,
)
from .exact import (
    CandidateGrid,
    EnumerationCapError,
    ExactSolution,
    MilpInstance,
    build_grid,
    build_instance,
    optimal_assignment,
    placement_from_solution,
    solve_exact,
)
from .force3d import (
    Force3dInfo,
    ForceParams,
    HeightBounds,
    force3d_solve,
    height_bounds,
    pairwise_force,
    total_force,
)
from .greedy import GreedyParams, greedy_solve
from .harness import (
    ExperimentConfig,
    ResultRow,
    load_config,
    parse_config,
    read_rows,
    run_experiment,
    summarize,
    write_rows,
    write_summary,
)
from .scenario import (
    AreaSpec,
    DistributionSpec,
    Point3,
    Scenario,
    default_tbs,
    generate_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "MODE_2D",
    "MODE_3D",
    "SpiralParams",
    "spiral_solve",
    "ChannelParams",
    "abs_path_loss_db",
    "abs_received_power",
    "coverage_radius",
    "los_probability",
    "min_rx_power",
    "received_power",
    "snr_eligible",
    "tbs_path_loss",
    "tbs_received_power",
    "user_bit_rate",
    "Association",
    "EvalReport",
    "Placement",
    "Site",
    "coverage_target",
    "evaluate",
    "feasibility_check",
    "nearest_feasible_association",
    "rx_power_matrix",
    "CandidateGrid",
    "EnumerationCapError",
    "ExactSolution",
    "MilpInstance",
    "build_grid",
    "build_instance",
    "optimal_assignment",
    "placement_from_solution",
    "solve_exact",
    "Force3dInfo",
    "ForceParams",
    "HeightBounds",
    "force3d_solve",
    "height_bounds",
    "pairwise_force",
    "total_force",
    "GreedyParams",
    "greedy_solve",
    "ExperimentConfig",
    "ResultRow",
    "load_config",
    "parse_config",
    "read_rows",
    "run_experiment",
    "summarize",
    "write_rows",
    "write_summary",
    "AreaSpec",
    "DistributionSpec",
    "Point3",
    "Scenario",
    "default_tbs",
    "generate_scenario",
    "__version__",
]
