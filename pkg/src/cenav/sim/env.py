"""Kinematic agent stepping, episode status tracking, batched rollouts.

Commands are body-frame velocities (v_x, v_y, v_yaw).  Translation uses the
heading held at the start of the step; the heading then advances and wraps
to (-pi, pi].  Collision tests inflate the agent to a disc of its body
radius and treat contact strictly: distance < radius collides, touching at
exactly radius does not.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import kernels
from .world import World

OBS_DIM = 151  # 144 rays + goal direction (3) + lin vel (2) + ang vel + goal dist
GOAL_DIST_CAP = 20.0
GOAL_DIST_SCALE = 10.0


class EpisodeStatus(IntEnum):
    RUNNING = 0
    COLLIDED = 1
    REACHED_GOAL = 2
    TIMED_OUT = 3


@dataclass
class AgentState:
    x: float
    y: float
    theta: float
    vx: float = 0.0
    vy: float = 0.0
    vyaw: float = 0.0


def wrap_angle(theta):
    """Map angle(s) to (-pi, pi]."""
    r = theta - 2.0 * np.pi * np.floor((theta + np.pi) / (2.0 * np.pi))
    if np.isscalar(r) or r.ndim == 0:
        return float(r + 2.0 * np.pi) if r <= -np.pi else float(r)
    r = np.asarray(r)
    r[r <= -np.pi] += 2.0 * np.pi
    return r


def step_agent(state: AgentState, v_cmd, dt: float) -> AgentState:
    """Integrate one step of body-frame velocity; no collision handling."""
    vx, vy, vyaw = float(v_cmd[0]), float(v_cmd[1]), float(v_cmd[2])
    c = np.cos(state.theta)
    s = np.sin(state.theta)
    return AgentState(
        x=state.x + (vx * c - vy * s) * dt,
        y=state.y + (vx * s + vy * c) * dt,
        theta=wrap_angle(state.theta + vyaw * dt),
        vx=vx,
        vy=vy,
        vyaw=vyaw,
    )


def check_collision(world: World, pos, radius: float) -> bool:
    """Strict containment test: closest approach below radius collides."""
    d = kernels.clearance_batch(
        np.asarray(pos, dtype=np.float64).reshape(1, 2),
        world.rects, world._ptr, world.side,
    )
    return bool(d[0] < radius)


def point_inside_obstacle(world: World, pos) -> bool:
    x, y = float(pos[0]), float(pos[1])
    r = world.rects
    if r.shape[0] == 0:
        return False
    return bool(np.any((np.abs(x - r[:, 0]) < r[:, 2]) & (np.abs(y - r[:, 1]) < r[:, 3])))


def raycast(world: World, pos, heading: float,
            n_rays: int = kernels.N_RAYS, max_range: float = kernels.MAX_RANGE) -> np.ndarray:
    """Distances (meters, capped) of n_rays beams; all zeros from inside an obstacle."""
    out, _ = kernels.raycast_batch(
        np.asarray(pos, dtype=np.float64).reshape(1, 2),
        np.array([heading], dtype=np.float64),
        world.rects, world._ptr, world.side, n_rays, max_range,
    )
    return out[0]


class WorldBatch:
    """CSR view over per-env worlds sharing one arena side length."""

    def __init__(self, worlds: list[World]):
        sides = {w.side for w in worlds}
        if len(sides) != 1:
            raise ValueError("all worlds in a batch must share the same side length")
        self.side = sides.pop()
        self.worlds = list(worlds)
        counts = [w.n_obstacles for w in worlds]
        self.ptr = np.zeros(len(worlds) + 1, dtype=np.int64)
        np.cumsum(counts, out=self.ptr[1:])
        if sum(counts):
            self.rects = np.concatenate([w.rects for w in worlds], axis=0)
        else:
            self.rects = np.zeros((0, 4))

    def replace(self, i: int, world: World) -> None:
        """Swap env i's world; rebuilds the flat buffer."""
        if world.side != self.side:
            raise ValueError("replacement world has a different side length")
        self.worlds[i] = world
        counts = [w.n_obstacles for w in self.worlds]
        self.ptr = np.zeros(len(self.worlds) + 1, dtype=np.int64)
        np.cumsum(counts, out=self.ptr[1:])
        if sum(counts):
            self.rects = np.concatenate([w.rects for w in self.worlds], axis=0)
        else:
            self.rects = np.zeros((0, 4))


class VecState:
    """Mutable pose/velocity/status arrays for a batch of agents."""

    def __init__(self, n_envs: int):
        self.pos = np.zeros((n_envs, 2))
        self.theta = np.zeros(n_envs)
        self.vel = np.zeros((n_envs, 3))
        self.goal = np.zeros((n_envs, 2))
        self.steps = np.zeros(n_envs, dtype=np.int64)
        self.status = np.full(n_envs, int(EpisodeStatus.RUNNING), dtype=np.int64)

    @property
    def n_envs(self) -> int:
        return self.pos.shape[0]


def batch_step(vec: VecState, v_actual: np.ndarray, wb: WorldBatch, dt: float,
               radius: float, goal_radius: float = 0.3,
               max_steps: int = 1500) -> np.ndarray:
    """Advance every running env one step; terminal envs are untouched.

    v_actual are achieved body-frame velocities (post-tracker).  Returns the
    status array after the step.  Collision dominates goal arrival when both
    would trigger.
    """
    active = vec.status == int(EpisodeStatus.RUNNING)
    if not np.any(active):
        return vec.status.copy()
    c = np.cos(vec.theta)
    s = np.sin(vec.theta)
    disp = np.zeros_like(vec.pos)
    disp[:, 0] = (v_actual[:, 0] * c - v_actual[:, 1] * s) * dt
    disp[:, 1] = (v_actual[:, 0] * s + v_actual[:, 1] * c) * dt
    new_pos, collided = kernels.sweep_batch(
        vec.pos, disp, wb.rects, wb.ptr, wb.side, radius, active
    )
    vec.pos[active] = new_pos[active]
    vec.vel[active] = v_actual[active]
    vec.theta[active] = wrap_angle(vec.theta[active] + v_actual[active, 2] * dt)
    vec.steps[active] += 1

    hit = active & collided
    vec.status[hit] = int(EpisodeStatus.COLLIDED)
    still = active & ~collided
    d_goal = np.linalg.norm(vec.goal - vec.pos, axis=1)
    reached = still & (d_goal <= goal_radius)
    vec.status[reached] = int(EpisodeStatus.REACHED_GOAL)
    timed = still & ~reached & (vec.steps >= max_steps)
    vec.status[timed] = int(EpisodeStatus.TIMED_OUT)
    return vec.status.copy()


def observe_batch(vec: VecState, wb: WorldBatch,
                  n_rays: int = kernels.N_RAYS,
                  max_range: float = kernels.MAX_RANGE) -> np.ndarray:
    """Build (E, 151) observations: normalized rays then the 7 state scalars.

    State block: body-frame unit goal direction (x, y, 0), body-frame linear
    velocity, yaw rate, and goal distance clipped at 20 m then divided by 10.
    """
    rays, _ = kernels.raycast_batch(vec.pos, vec.theta, wb.rects, wb.ptr,
                                    wb.side, n_rays, max_range)
    out = np.empty((vec.n_envs, n_rays + 7))
    out[:, :n_rays] = rays / max_range
    dxy = vec.goal - vec.pos
    d = np.linalg.norm(dxy, axis=1)
    safe = np.maximum(d, 1e-12)
    ux = dxy[:, 0] / safe
    uy = dxy[:, 1] / safe
    at_goal = d == 0.0
    ux[at_goal] = 0.0
    uy[at_goal] = 0.0
    c = np.cos(vec.theta)
    s = np.sin(vec.theta)
    out[:, n_rays + 0] = c * ux + s * uy
    out[:, n_rays + 1] = -s * ux + c * uy
    out[:, n_rays + 2] = 0.0
    out[:, n_rays + 3] = vec.vel[:, 0]
    out[:, n_rays + 4] = vec.vel[:, 1]
    out[:, n_rays + 5] = vec.vel[:, 2]
    out[:, n_rays + 6] = np.minimum(d, GOAL_DIST_CAP) / GOAL_DIST_SCALE
    return out


def observe_single(world: World, state: AgentState, goal) -> np.ndarray:
    """Single-agent observation through the batched path."""
    vec = VecState(1)
    vec.pos[0] = (state.x, state.y)
    vec.theta[0] = state.theta
    vec.vel[0] = (state.vx, state.vy, state.vyaw)
    vec.goal[0] = goal
    return observe_batch(vec, WorldBatch([world]))[0]
