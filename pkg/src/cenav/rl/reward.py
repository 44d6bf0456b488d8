"""Shaped navigation reward, computed on achieved motion.

Every term is evaluated from what the body actually did after the
embodiment emulator, never from the commanded velocity.  Signs live in the
formulas; the config holds positive magnitudes matching the shipped table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim.env import EpisodeStatus
from ..sim.kernels import MAX_RANGE, N_RAYS


@dataclass(frozen=True)
class RewardConfig:
    w_distance: float = 1.0
    w_checkpoint: float = 10.0
    checkpoint_every: int = 500
    w_heading: float = 1.0
    frontal_half_angle_deg: float = 30.0
    w_goal: float = 50.0
    w_linear_smooth: float = 0.5
    w_yaw_smooth: float = 0.01
    w_stability: float = 1.0
    tilt_gain: float = 0.0          # 0 keeps the stability term inert in 2D
    w_safety: float = 1.0
    safety_floor: float = 0.05      # metres; rays shorter than this saturate
    w_collision: float = 50.0
    v_max: float = 1.5
    dt: float = 0.1


def frontal_ray_indices(cfg: RewardConfig, n_rays: int = N_RAYS) -> np.ndarray:
    """Rays within the frontal cone, by index.

    Ray i points at heading + 2*pi*i/n, so the cone wraps around index 0.
    """
    ang = 2.0 * np.pi * np.arange(n_rays) / n_rays
    ang = np.where(ang > np.pi, ang - 2.0 * np.pi, ang)
    half = np.deg2rad(cfg.frontal_half_angle_deg)
    return np.flatnonzero(np.abs(ang) <= half + 1e-12)


@dataclass
class Transition:
    """Batched before/after snapshot of one vectorized env step."""

    d_prev: np.ndarray          # (E,) goal distance before the step
    d_now: np.ndarray           # (E,) goal distance after
    obs: np.ndarray             # (E, 151) post-step observation
    v_prev: np.ndarray          # (E, 3) achieved velocity before
    v_now: np.ndarray           # (E, 3) achieved velocity after
    status: np.ndarray          # (E,) post-step EpisodeStatus codes
    d0: np.ndarray              # (E,) goal distance at episode start
    checkpoint_delta: np.ndarray  # (E,) progress since last boundary, else 0


def compute_reward(cfg: RewardConfig,
                   trans: Transition) -> tuple[np.ndarray, dict]:
    """Per-env reward and its component map for one transition batch."""
    obs = np.atleast_2d(trans.obs)
    rays_m = obs[:, :N_RAYS] * MAX_RANGE
    comp = {}

    comp["distance"] = (cfg.w_distance * (trans.d_prev - trans.d_now)
                        / (cfg.dt * cfg.v_max))
    comp["checkpoint"] = cfg.w_checkpoint * trans.checkpoint_delta

    # obs[:, 144] is cos(bearing to goal) in the body frame already
    frontal = frontal_ray_indices(cfg)
    w_clear = np.clip(rays_m[:, frontal].min(axis=1) / MAX_RANGE, 0.0, 1.0)
    comp["heading"] = cfg.w_heading * obs[:, N_RAYS] * w_clear

    succeeded = trans.status == int(EpisodeStatus.REACHED_GOAL)
    comp["goal"] = np.where(succeeded, cfg.w_goal * trans.d0, 0.0)

    dv = trans.v_now - trans.v_prev
    comp["linear_smooth"] = -cfg.w_linear_smooth * (dv[:, 0] ** 2 + dv[:, 1] ** 2)
    comp["yaw_smooth"] = -cfg.w_yaw_smooth * dv[:, 2] ** 2

    if cfg.tilt_gain > 0.0:
        # proxy attitude: pitch/roll proportional to body-frame acceleration
        acc = dv[:, :2] / cfg.dt
        tilt = cfg.tilt_gain * acc
        comp["stability"] = -cfg.w_stability * (tilt ** 2).sum(axis=1)
    else:
        comp["stability"] = np.zeros(obs.shape[0])

    comp["safety"] = cfg.w_safety * np.mean(
        np.log(np.maximum(rays_m, cfg.safety_floor)), axis=1)

    collided = trans.status == int(EpisodeStatus.COLLIDED)
    comp["collision"] = np.where(collided, -cfg.w_collision, 0.0)

    total = np.zeros(obs.shape[0])
    for term in comp.values():
        total += term
    return total, comp
