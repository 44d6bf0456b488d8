"""Dynamic-window velocity planner used as the offline expert.

Candidate body velocities are enumerated on a resolution grid inside the
acceleration-limited window around the current velocity, rolled out as
constant arcs, and scored as

    score = to_goal_gain * goal_score + speed_gain * speed_score
            + obstacle_gain * clearance_score

with every component in [0, 1].  Candidates whose arc collides are rejected.
Besides the argmax the planner reports the whole near-optimal band
(score >= (1 - band_delta) * best), which is what dataset harvesting feeds
on: the band is where multi-modality lives.

When every candidate collides the planner emits a recovery command: stop and
rotate in place toward the goal at half the yaw-rate limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .backend import USE_NUMBA, jit_kernel
from .sim.env import AgentState, wrap_angle
from .sim.kernels import _boundary_dist_nb, _point_rect_dist_nb
from .sim.world import World


@dataclass
class DwaParams:
    max_speed: float = 1.5
    min_speed: float = -1.5
    max_yaw_rate: float = 1.57
    min_yaw_rate: float = -1.57
    max_accel: float = 1.5
    min_accel: float = -5.0
    max_delta_yaw_rate: float = 5.23
    v_resolution: float = 0.1
    yaw_rate_resolution: float = 0.17
    dt: float = 0.1
    predict_time: float = 1.0
    robot_radius: float = 0.2
    goal_tolerance: float = 0.4
    to_goal_gain: float = 1.0
    speed_gain: float = 15.0
    obstacle_gain: float = 0.5
    band_delta: float = 0.1
    clearance_saturation: float = 1.0
    holonomic: bool = False
    stop_patience: int = 30


@dataclass
class PlanResult:
    best: np.ndarray          # (3,) chosen (v_x, v_y, v_yaw)
    band: np.ndarray          # (K, 3) all near-optimal actions, best included
    best_score: float
    emergency: bool
    n_candidates: int
    n_valid: int


def dynamic_window(state: AgentState, params: DwaParams) -> tuple[float, float, float, float]:
    """Reachable (v_lo, v_hi, w_lo, w_hi) after one control interval."""
    v_lo = max(params.min_speed, state.vx + params.min_accel * params.dt)
    v_hi = min(params.max_speed, state.vx + params.max_accel * params.dt)
    w_lo = max(params.min_yaw_rate, state.vyaw - params.max_delta_yaw_rate * params.dt)
    w_hi = min(params.max_yaw_rate, state.vyaw + params.max_delta_yaw_rate * params.dt)
    return v_lo, v_hi, w_lo, w_hi


def _grid(lo: float, hi: float, res: float) -> np.ndarray:
    n = max(1, int(math.floor((hi - lo) / res + 1e-9)) + 1)
    return lo + res * np.arange(n)


def rollout_arc(state: AgentState, v: float, vy: float, w: float,
                params: DwaParams) -> np.ndarray:
    """Constant-velocity arc: poses (n_steps, 3) after each integration step."""
    n_steps = int(round(params.predict_time / params.dt))
    out = np.empty((n_steps, 3))
    px, py, pth = state.x, state.y, state.theta
    for k in range(n_steps):
        px += (v * math.cos(pth) - vy * math.sin(pth)) * params.dt
        py += (v * math.sin(pth) + vy * math.cos(pth)) * params.dt
        pth += w * params.dt
        out[k] = (px, py, pth)
    return out


@jit_kernel(cache=True)
def _wrap_nb(theta):
    r = theta - 2.0 * np.pi * math.floor((theta + np.pi) / (2.0 * np.pi))
    if r <= -np.pi:
        r += 2.0 * np.pi
    return r


@jit_kernel(cache=True)
def _dwa_eval_nb(x, y, theta, gx, gy, rects, side, v_grid, vy_grid, w_grid,
                 n_steps, dt, radius, sat, min_speed, max_speed,
                 g_goal, g_speed, g_clear, scores, rejects, comps):
    n_rects = rects.shape[0]
    nv = v_grid.shape[0]
    nvy = vy_grid.shape[0]
    nw = w_grid.shape[0]
    for iv in range(nv):
        v = v_grid[iv]
        for iy in range(nvy):
            vy = vy_grid[iy]
            for iw in range(nw):
                w = w_grid[iw]
                c = (iv * nvy + iy) * nw + iw
                px = x
                py = y
                pth = theta
                min_clear = np.inf
                bad = False
                for _ in range(n_steps):
                    px += (v * math.cos(pth) - vy * math.sin(pth)) * dt
                    py += (v * math.sin(pth) + vy * math.cos(pth)) * dt
                    pth += w * dt
                    d = _point_rect_dist_nb(px, py, rects, 0, n_rects)
                    b = _boundary_dist_nb(px, py, side)
                    if b < d:
                        d = b
                    if d < radius:
                        bad = True
                        break
                    cl = d - radius
                    if cl < min_clear:
                        min_clear = cl
                if bad:
                    rejects[c] = True
                    scores[c] = -np.inf
                    comps[0, c] = -1.0
                    comps[1, c] = -1.0
                    comps[2, c] = -1.0
                    continue
                rejects[c] = False
                diff = _wrap_nb(math.atan2(gy - py, gx - px) - pth)
                goal_score = 1.0 - abs(diff) / np.pi
                speed_score = (v - min_speed) / (max_speed - min_speed)
                clear_score = min_clear / sat
                if clear_score > 1.0:
                    clear_score = 1.0
                comps[0, c] = goal_score
                comps[1, c] = speed_score
                comps[2, c] = clear_score
                scores[c] = g_goal * goal_score + g_speed * speed_score + g_clear * clear_score


def _dwa_eval_np(x, y, theta, gx, gy, rects, side, v_grid, vy_grid, w_grid,
                 n_steps, dt, radius, sat, min_speed, max_speed,
                 g_goal, g_speed, g_clear, scores, rejects, comps):
    # Vectorized over candidates but looped over rollout steps, accumulating
    # in the same order as the scalar kernel so both backends round alike.
    vv, yy, ww = np.meshgrid(v_grid, vy_grid, w_grid, indexing="ij")
    v = vv.reshape(-1)
    vy = yy.reshape(-1)
    w = ww.reshape(-1)
    n = v.size
    px = np.full(n, x)
    py = np.full(n, y)
    pth = np.full(n, theta)
    bad = np.zeros(n, dtype=np.bool_)
    min_clear = np.full(n, np.inf)
    for _ in range(n_steps):
        c = np.cos(pth)
        s = np.sin(pth)
        px = px + (v * c - vy * s) * dt
        py = py + (v * s + vy * c) * dt
        pth = pth + w * dt
        if rects.shape[0]:
            ddx = np.maximum(np.abs(px[:, None] - rects[:, 0]) - rects[:, 2], 0.0)
            ddy = np.maximum(np.abs(py[:, None] - rects[:, 1]) - rects[:, 3], 0.0)
            d = np.sqrt(ddx * ddx + ddy * ddy).min(axis=1)
        else:
            d = np.full(n, np.inf)
        d = np.minimum(d, np.minimum(np.minimum(px, side - px),
                                     np.minimum(py, side - py)))
        # A candidate already rejected keeps its flag; later poses are moot.
        fresh = ~bad & (d < radius)
        bad |= fresh
        live = ~bad
        min_clear[live] = np.minimum(min_clear[live], d[live] - radius)

    diff = np.arctan2(gy - py, gx - px) - pth
    diff = diff - 2.0 * np.pi * np.floor((diff + np.pi) / (2.0 * np.pi))
    diff = np.where(diff <= -np.pi, diff + 2.0 * np.pi, diff)
    goal_score = 1.0 - np.abs(diff) / np.pi
    speed_score = (v - min_speed) / (max_speed - min_speed)
    clear_score = np.minimum(min_clear / sat, 1.0)
    total = g_goal * goal_score + g_speed * speed_score + g_clear * clear_score
    rejects[:] = bad
    scores[:] = np.where(bad, -np.inf, total)
    comps[0, :] = np.where(bad, -1.0, goal_score)
    comps[1, :] = np.where(bad, -1.0, speed_score)
    comps[2, :] = np.where(bad, -1.0, clear_score)


_dwa_eval = _dwa_eval_nb if USE_NUMBA else _dwa_eval_np


def evaluate_candidates(state: AgentState, goal, world: World, params: DwaParams):
    """Score every window candidate; returns (actions (C,3), scores, rejects, comps)."""
    v_lo, v_hi, w_lo, w_hi = dynamic_window(state, params)
    v_grid = _grid(v_lo, v_hi, params.v_resolution)
    if params.holonomic:
        vy_lo = max(params.min_speed, state.vy + params.min_accel * params.dt)
        vy_hi = min(params.max_speed, state.vy + params.max_accel * params.dt)
        vy_grid = _grid(vy_lo, vy_hi, params.v_resolution)
    else:
        vy_grid = np.zeros(1)
    w_grid = _grid(w_lo, w_hi, params.yaw_rate_resolution)
    n_steps = int(round(params.predict_time / params.dt))
    n = v_grid.size * vy_grid.size * w_grid.size
    scores = np.empty(n)
    rejects = np.zeros(n, dtype=np.bool_)
    comps = np.empty((3, n))
    _dwa_eval(state.x, state.y, state.theta, float(goal[0]), float(goal[1]),
              world.rects, world.side, v_grid, vy_grid, w_grid, n_steps,
              params.dt, params.robot_radius, params.clearance_saturation,
              params.min_speed, params.max_speed, params.to_goal_gain,
              params.speed_gain, params.obstacle_gain, scores, rejects, comps)
    actions = np.empty((n, 3))
    vv, yy, ww = np.meshgrid(v_grid, vy_grid, w_grid, indexing="ij")
    actions[:, 0] = vv.reshape(-1)
    actions[:, 1] = yy.reshape(-1)
    actions[:, 2] = ww.reshape(-1)
    return actions, scores, rejects, comps


def plan(state: AgentState, goal, world: World, params: DwaParams) -> PlanResult:
    """Best action plus the near-optimal band; recovery command when all collide."""
    actions, scores, rejects, _ = evaluate_candidates(state, goal, world, params)
    valid = ~rejects
    if not np.any(valid):
        diff = wrap_angle(math.atan2(goal[1] - state.y, goal[0] - state.x) - state.theta)
        sign = 1.0 if diff >= 0.0 else -1.0
        best = np.array([0.0, 0.0, sign * params.max_yaw_rate / 2.0])
        return PlanResult(best, np.zeros((0, 3)), -np.inf, True, actions.shape[0], 0)
    best_score = scores[valid].max()
    # Ties resolve toward smaller |yaw rate|, then smaller v, then smaller |v_y|.
    tied = np.flatnonzero(scores == best_score)
    order = np.lexsort((np.abs(actions[tied, 1]), actions[tied, 0],
                        np.abs(actions[tied, 2])))
    best_idx = tied[order[0]]
    band_mask = valid & (scores >= (1.0 - params.band_delta) * best_score)
    return PlanResult(actions[best_idx].copy(), actions[band_mask].copy(),
                      float(best_score), False, actions.shape[0],
                      int(valid.sum()))


def score_candidate(state: AgentState, goal, world: World, params: DwaParams,
                    v: float, w: float, vy: float = 0.0):
    """Score one explicit candidate: (score, goal_s, speed_s, clear_s, rejected)."""
    poses = rollout_arc(state, v, vy, w, params)
    min_clear = np.inf
    for px, py, _ in poses:
        d = min(
            _point_rect_dist_np_single(px, py, world.rects),
            px, world.side - px, py, world.side - py,
        )
        if d < params.robot_radius:
            return -np.inf, -1.0, -1.0, -1.0, True
        min_clear = min(min_clear, d - params.robot_radius)
    ex, ey, eth = poses[-1]
    diff = wrap_angle(math.atan2(goal[1] - ey, goal[0] - ex) - eth)
    goal_score = 1.0 - abs(diff) / np.pi
    speed_score = (v - params.min_speed) / (params.max_speed - params.min_speed)
    clear_score = min(min_clear / params.clearance_saturation, 1.0)
    score = (params.to_goal_gain * goal_score + params.speed_gain * speed_score
             + params.obstacle_gain * clear_score)
    return score, goal_score, speed_score, clear_score, False


def _point_rect_dist_np_single(px, py, rects) -> float:
    if rects.shape[0] == 0:
        return np.inf
    dx = np.maximum(np.abs(px - rects[:, 0]) - rects[:, 2], 0.0)
    dy = np.maximum(np.abs(py - rects[:, 1]) - rects[:, 3], 0.0)
    return float(np.min(np.sqrt(dx * dx + dy * dy)))


def desk_params(**overrides) -> DwaParams:
    """Table defaults with keyword overrides."""
    return replace(DwaParams(), **overrides)
