from .world import (
    World,
    generate_world,
    sample_start_goal,
    world_from_file,
    world_to_file,
    free_at,
)
from .env import (
    AgentState,
    EpisodeStatus,
    VecState,
    WorldBatch,
    batch_step,
    check_collision,
    observe_batch,
    observe_single,
    point_inside_obstacle,
    raycast,
    step_agent,
    wrap_angle,
    OBS_DIM,
)
from .kernels import (
    MAX_RANGE,
    N_RAYS,
    clearance_batch,
    raycast_batch,
    sweep_batch,
    warmup_kernels,
)

__all__ = [
    "World", "generate_world", "sample_start_goal", "world_from_file",
    "world_to_file", "free_at", "AgentState", "EpisodeStatus", "VecState",
    "WorldBatch", "batch_step", "check_collision", "observe_batch",
    "observe_single", "point_inside_obstacle", "raycast", "step_agent",
    "wrap_angle", "OBS_DIM", "MAX_RANGE", "N_RAYS", "clearance_batch",
    "raycast_batch", "sweep_batch", "warmup_kernels",
]
