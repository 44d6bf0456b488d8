"""Closed-loop refiner training against a frozen velocity expert.

Each env step samples one reference command from the expert, concatenates
it with the policy's own state embedding, acts, scales to the embodiment's
limits and steps the tracked simulation.  Every ``horizon`` steps the
collected rollout feeds a guided PPO update whose guidance weight follows
an exponential decay curriculum indexed by gradient-step count.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..embodiment import EXPERT_LIMITS, EmbodimentSpec, compute_scale
from ..nn import Adam
from .env import EnvConfig, VecNavEnv
from .policy import PolicyNet, scale_action
from .ppo import PpoConfig, RolloutBuffer, ppo_update
from .reward import RewardConfig

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "update", "lambda", "mean_reward", "ppo_loss",
               "guide_loss", "value_loss", "entropy", "sr_rolling")


@dataclass(frozen=True)
class CurriculumSchedule:
    lambda_init: float = 0.5
    t1: int = 1000
    t2: int = 5000
    lambda_final: float = 0.05

    def __post_init__(self):
        if self.lambda_init < 0.0 or self.lambda_final < 0.0:
            raise ValueError("lambda weights must be nonnegative")
        if self.lambda_final > self.lambda_init:
            raise ValueError("schedule must be non-increasing")
        if self.t2 < self.t1:
            raise ValueError("need t1 <= t2")


def lambda_schedule(step: int, sched: CurriculumSchedule) -> float:
    """Guidance weight after ``step`` gradient updates."""
    if step < 0:
        raise ValueError("step must be nonnegative")
    if step < sched.t1:
        return sched.lambda_init
    if step >= sched.t2 or sched.lambda_final == sched.lambda_init:
        return sched.lambda_final
    frac = (step - sched.t1) / (sched.t2 - sched.t1)
    return float(sched.lambda_init
                 * (sched.lambda_final / sched.lambda_init) ** frac)


@dataclass
class RefinerResult:
    policy: PolicyNet
    ett_seconds: float
    rows: list = field(default_factory=list)
    sr_rolling: float = 0.0
    episodes: int = 0
    successes: int = 0


def _clamp_ref(v_ref: np.ndarray) -> np.ndarray:
    lim = np.asarray(EXPERT_LIMITS)
    return np.clip(v_ref, -lim, lim)


def train_refiner(expert, emb: EmbodimentSpec,
                  env_cfg: EnvConfig | None = None,
                  ppo_cfg: PpoConfig | None = None,
                  sched: CurriculumSchedule | None = None,
                  n_updates: int = 300, seed: int = 0,
                  reward_cfg: RewardConfig | None = None,
                  log_path=None, policy: PolicyNet | None = None,
                  callback=None) -> RefinerResult:
    """Train a refiner policy; returns it with the metrics log and ETT.

    ``expert`` stays frozen: it is only ever sampled through its numpy
    path, and an assertion checks after every update that none of its
    parameters accumulated a gradient.
    """
    env_cfg = env_cfg or EnvConfig()
    ppo_cfg = ppo_cfg or PpoConfig()
    sched = sched or CurriculumSchedule()
    scale = compute_scale(EXPERT_LIMITS, emb.v_limits)
    if scale <= 0.0:
        raise ValueError(f"embodiment {emb.name} incompatible with expert "
                         f"limits (scale={scale})")

    env = VecNavEnv(env_cfg, emb, reward_cfg=reward_cfg, auto_reset=True)
    if policy is None:
        policy = PolicyNet(seed=seed, v_lim=emb.v_limits)
    rng = np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(2 ** 20,)))
    optimizer = Adam(
        [(p, ppo_cfg.lr_encoder) for p in policy.encoder_parameters()]
        + [(p, ppo_cfg.lr_actor) for p in policy.actor_parameters()]
        + [(p, ppo_cfg.lr_critic) for p in policy.critic_parameters()])
    buffer = RolloutBuffer(ppo_cfg.horizon, env_cfg.n_envs)
    grad_steps_per_update = ppo_cfg.epochs * ppo_cfg.minibatches

    result = RefinerResult(policy=policy, ett_seconds=0.0)
    writer = None
    fh = None
    if log_path is not None:
        fh = open(log_path, "w", newline="")
        writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
        writer.writeheader()

    obs = env.observe()
    pending_ref = None
    # a trained expert may carry stale grads from its own fit; frozen here
    # means this loop never touches them (backward always rebinds .grad)
    expert_grads = [p.grad for p in expert.parameters()]
    t0 = time.perf_counter()
    try:
        for update in range(n_updates):
            buffer.reset()
            for _ in range(ppo_cfg.horizon):
                if pending_ref is None:
                    v_ref = _clamp_ref(expert.sample_rows(obs, rng))
                else:
                    v_ref = pending_ref
                    pending_ref = None
                guided = policy.guided_state(obs, v_ref)
                v_norm, pre, logp, value = policy.act(guided, rng)
                v_cmd = scale_action(v_norm, policy.v_lim)
                obs_next, reward, done, _ = env.step(v_cmd)
                buffer.add(obs, v_ref, pre, logp, value, reward, done)
                obs = obs_next
            # the bootstrap draw is reused as the next rollout's first
            # reference so every env step consumes exactly one sample
            pending_ref = _clamp_ref(expert.sample_rows(obs, rng))
            last_value = policy.value(policy.guided_state(obs, pending_ref))
            lam = lambda_schedule(update * grad_steps_per_update, sched)
            report = ppo_update(policy, buffer, last_value, lam, scale,
                                ppo_cfg, rng, optimizer)
            assert all(p.grad is g for p, g in zip(expert.parameters(),
                                                   expert_grads)), \
                "frozen expert accumulated gradients"
            row = {
                "step": (update + 1) * ppo_cfg.horizon * env_cfg.n_envs,
                "update": update,
                "lambda": lam,
                "mean_reward": float(buffer.reward.mean()),
                "ppo_loss": report["ppo_loss"],
                "guide_loss": report["guide_loss"],
                "value_loss": report["value_loss"],
                "entropy": report["entropy"],
                "sr_rolling": env.sr_rolling,
            }
            result.rows.append(row)
            if writer is not None:
                writer.writerow(row)
                fh.flush()
            if callback is not None:
                callback(update, row)
            if update % 25 == 0 or update == n_updates - 1:
                log.info("update %d/%d lambda=%.4f reward=%.3f sr=%.2f",
                         update + 1, n_updates, lam, row["mean_reward"],
                         row["sr_rolling"])
    finally:
        if fh is not None:
            fh.close()
    result.ett_seconds = time.perf_counter() - t0
    result.sr_rolling = env.sr_rolling
    result.episodes = env.episodes_finished
    result.successes = env.successes
    return result
