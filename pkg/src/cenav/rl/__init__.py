"""Guided PPO refinement stage: policy, reward, vec env, training loop."""

from .env import EnvConfig, VecNavEnv
from .policy import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    PolicyNet,
    scale_action,
)
from .ppo import PpoConfig, RolloutBuffer, compute_gae, ppo_update
from .reward import (
    RewardConfig,
    Transition,
    compute_reward,
    frontal_ray_indices,
)
from .train import (
    LOG_COLUMNS,
    CurriculumSchedule,
    RefinerResult,
    lambda_schedule,
    train_refiner,
)

__all__ = [
    "EnvConfig", "VecNavEnv", "LOG_STD_MAX", "LOG_STD_MIN", "PolicyNet",
    "scale_action", "PpoConfig", "RolloutBuffer", "compute_gae",
    "ppo_update", "RewardConfig", "Transition", "compute_reward",
    "frontal_ray_indices", "LOG_COLUMNS", "CurriculumSchedule",
    "RefinerResult", "lambda_schedule", "train_refiner",
]
