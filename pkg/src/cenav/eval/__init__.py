from .ablate import (
    VARIANTS,
    AblationConfig,
    AblationResult,
    NullProposals,
    RegressorProposals,
    guidance_only_policy_fn,
    refined_policy_fn,
    run_ablation,
)
from .bench import (
    TRAJ_COLUMNS,
    EpisodeRecord,
    Report,
    run_benchmark,
    spl,
    write_trajectories,
)
from .path import PathPlanner, clearance_points, occupancy_grid, shortest_path_length
from .suite import BenchmarkSuite, SuiteConfig, TaskSet, fast_config

__all__ = [
    "AblationConfig",
    "AblationResult",
    "BenchmarkSuite",
    "EpisodeRecord",
    "NullProposals",
    "PathPlanner",
    "RegressorProposals",
    "Report",
    "SuiteConfig",
    "TRAJ_COLUMNS",
    "TaskSet",
    "VARIANTS",
    "clearance_points",
    "fast_config",
    "guidance_only_policy_fn",
    "occupancy_grid",
    "refined_policy_fn",
    "run_ablation",
    "run_benchmark",
    "shortest_path_length",
    "spl",
    "write_trajectories",
]
