"""Vectorized navigation environment: worlds + emulated embodiment + reward.

Each env owns a fixed world; episodes within it resample start, goal and
heading.  Commands pass through the embodiment tracker before the kinematic
step, so the agent only ever moves at achieved velocities.  The same class
runs training rollouts (auto-reset) and benchmark episodes (fixed task
list, no reset).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..embodiment import EmbodimentSpec, VecTracker
from ..sim.env import (
    EpisodeStatus,
    VecState,
    WorldBatch,
    batch_step,
    observe_batch,
)
from ..sim.world import World, generate_world, sample_start_goal
from .reward import RewardConfig, Transition, compute_reward


@dataclass(frozen=True)
class EnvConfig:
    n_envs: int = 64
    kind: str = "forest"
    side: float = 20.0
    n_obstacles: int = 100
    min_separation: float = 8.0
    clearance: float = 0.5
    max_steps: int = 600
    dt: float = 0.1
    goal_tolerance: float = 0.3
    seed: int = 0


class VecNavEnv:
    """Batch of navigation episodes stepped in lockstep."""

    def __init__(self, cfg: EnvConfig, emb: EmbodimentSpec,
                 reward_cfg: RewardConfig | None = None,
                 auto_reset: bool = True,
                 worlds: list[World] | None = None,
                 tasks=None):
        self.cfg = cfg
        self.emb = emb
        self.auto_reset = auto_reset
        self.reward_cfg = reward_cfg or RewardConfig(
            v_max=emb.v_limits[0], dt=cfg.dt)
        if worlds is None:
            worlds = [generate_world(cfg.kind, cfg.side, cfg.n_obstacles,
                                     seed=cfg.seed * 100003 + i)
                      for i in range(cfg.n_envs)]
        if len(worlds) != cfg.n_envs:
            raise ValueError("need one world per env")
        self.worlds = worlds
        self.wb = WorldBatch(worlds)
        self.vec = VecState(cfg.n_envs)
        # independent streams per env so resets never couple episodes
        self._env_rngs = [
            np.random.default_rng(np.random.SeedSequence(cfg.seed,
                                                         spawn_key=(i,)))
            for i in range(cfg.n_envs)
        ]
        self.tracker = VecTracker(
            emb, cfg.n_envs,
            seed=np.random.SeedSequence(cfg.seed, spawn_key=(cfg.n_envs,)))
        self.d0 = np.zeros(cfg.n_envs)
        self._d_ref = np.zeros(cfg.n_envs)
        self._recent = deque(maxlen=100)
        self.episodes_finished = 0
        self.successes = 0
        if tasks is None:
            self.reset_rows(np.arange(cfg.n_envs))
        else:
            self.set_tasks(*tasks)

    @classmethod
    def from_tasks(cls, worlds: list[World], starts, goals, headings,
                   emb: EmbodimentSpec, *,
                   reward_cfg: RewardConfig | None = None,
                   dt: float = 0.1, goal_tolerance: float = 0.3,
                   max_steps: int = 600, seed: int = 0) -> "VecNavEnv":
        """Fixed task list, one episode per env, no auto-reset."""
        cfg = EnvConfig(n_envs=len(worlds), side=worlds[0].side,
                        max_steps=max_steps, dt=dt,
                        goal_tolerance=goal_tolerance, seed=seed)
        return cls(cfg, emb, reward_cfg=reward_cfg, auto_reset=False,
                   worlds=list(worlds), tasks=(starts, goals, headings))

    # ------------------------------------------------------------ lifecycle

    def reset_rows(self, idx) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        for i in idx:
            rng = self._env_rngs[i]
            start, goal = sample_start_goal(
                self.worlds[i], rng, self.cfg.min_separation,
                self.cfg.clearance)
            self.vec.pos[i] = start
            self.vec.goal[i] = goal
            self.vec.theta[i] = rng.uniform(-np.pi, np.pi)
        self.vec.vel[idx] = 0.0
        self.vec.steps[idx] = 0
        self.vec.status[idx] = int(EpisodeStatus.RUNNING)
        self.tracker.reset_envs(idx)
        d = np.linalg.norm(self.vec.goal[idx] - self.vec.pos[idx], axis=1)
        self.d0[idx] = d
        self._d_ref[idx] = d

    def set_tasks(self, starts, goals, headings) -> None:
        self.vec.pos[:] = np.asarray(starts, dtype=np.float64)
        self.vec.goal[:] = np.asarray(goals, dtype=np.float64)
        self.vec.theta[:] = np.asarray(headings, dtype=np.float64)
        self.vec.vel[:] = 0.0
        self.vec.steps[:] = 0
        self.vec.status[:] = int(EpisodeStatus.RUNNING)
        self.tracker.reset_envs(np.arange(self.cfg.n_envs))
        d = np.linalg.norm(self.vec.goal - self.vec.pos, axis=1)
        self.d0[:] = d
        self._d_ref[:] = d

    def observe(self) -> np.ndarray:
        return observe_batch(self.vec, self.wb)

    # ----------------------------------------------------------------- step

    def step(self, v_cmd: np.ndarray):
        """Apply physical commands; returns (obs, reward, done, info).

        done marks envs that terminated on THIS step.  With auto_reset the
        returned obs for those envs already belongs to the next episode.
        """
        cfg = self.cfg
        active = self.vec.status == int(EpisodeStatus.RUNNING)
        v_actual = self.tracker.step(np.atleast_2d(v_cmd), cfg.dt)
        d_prev = np.linalg.norm(self.vec.goal - self.vec.pos, axis=1)
        v_prev = self.vec.vel.copy()
        status = batch_step(self.vec, v_actual, self.wb, cfg.dt,
                            radius=self.emb.footprint_radius,
                            goal_radius=cfg.goal_tolerance,
                            max_steps=cfg.max_steps)
        obs = observe_batch(self.vec, self.wb)
        d_now = np.linalg.norm(self.vec.goal - self.vec.pos, axis=1)

        every = self.reward_cfg.checkpoint_every
        boundary = (active & (status == int(EpisodeStatus.RUNNING))
                    & (self.vec.steps > 0) & (self.vec.steps % every == 0))
        ck_delta = np.where(boundary, self._d_ref - d_now, 0.0)
        self._d_ref[boundary] = d_now[boundary]

        reward, components = compute_reward(self.reward_cfg, Transition(
            d_prev=d_prev, d_now=d_now, obs=obs, v_prev=v_prev,
            v_now=self.vec.vel.copy(), status=status, d0=self.d0.copy(),
            checkpoint_delta=ck_delta))
        reward[~active] = 0.0

        newly_done = active & (status != int(EpisodeStatus.RUNNING))
        for i in np.flatnonzero(newly_done):
            success = status[i] == int(EpisodeStatus.REACHED_GOAL)
            self._recent.append(bool(success))
            self.episodes_finished += 1
            self.successes += int(success)

        info = {
            "status": status.copy(),
            "v_actual": v_actual,
            "components": components,
            "episode_steps": self.vec.steps.copy(),
        }
        if self.auto_reset and newly_done.any():
            self.reset_rows(np.flatnonzero(newly_done))
            obs = observe_batch(self.vec, self.wb)
        return obs, reward, newly_done, info

    # ------------------------------------------------------------- metrics

    @property
    def sr_rolling(self) -> float:
        """Success rate over the last <=100 finished episodes (0 if none)."""
        if not self._recent:
            return 0.0
        return float(np.mean(self._recent))
