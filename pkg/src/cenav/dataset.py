"""Expert demonstration harvesting and the binary dataset container.

A planner episode runs closed loop: plan, execute the best action, repeat.
Every executed step of a *successful* episode contributes one sample per
member of that step's near-optimal band, all sharing the step observation.
Failed episodes (collision, timeout, persistent emergency stop) contribute
nothing: the dataset stays clean of dead ends.

File layout (magic ``CEDS``): format version u32, record length u32 (154 =
144 rays + 7 state + 3 action), sample count u64, then count records of
little-endian float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dwa import DwaParams, plan
from .sim.env import AgentState, check_collision, observe_single, step_agent
from .sim.world import World, generate_world, sample_start_goal

MAGIC = b"CEDS"
VERSION = 1
OBS_DIM = 151
ACT_DIM = 3
RECORD_LEN = OBS_DIM + ACT_DIM


@dataclass
class HarvestStats:
    worlds: int = 0
    successes: int = 0
    collisions: int = 0
    timeouts: int = 0
    stops: int = 0
    unplaceable: int = 0
    samples: int = 0
    executed_steps: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class WorldConfig:
    kind: str = "forest"
    side: float = 20.0
    n_obstacles: int = 100
    min_separation: float = 8.0
    clearance: float = 0.5
    max_steps: int = 600


def run_expert_episode(world: World, start, goal, params: DwaParams,
                       heading: float, max_steps: int):
    """Closed-loop planner run; returns (outcome, [(obs, band)] per step).

    outcome is one of success/collision/timeout/stop.  Emergency-stop steps
    execute the recovery command but record nothing (there is no scored band
    to harvest); an unbroken run of them longer than stop_patience fails the
    episode.
    """
    state = AgentState(float(start[0]), float(start[1]), float(heading))
    records = []
    consec_stops = 0
    for _ in range(max_steps):
        obs = observe_single(world, state, goal)
        result = plan(state, goal, world, params)
        if result.emergency:
            consec_stops += 1
            if consec_stops > params.stop_patience:
                return "stop", []
        else:
            consec_stops = 0
            records.append((obs, result.band))
        state = step_agent(state, result.best, params.dt)
        if check_collision(world, (state.x, state.y), params.robot_radius):
            return "collision", []
        if np.hypot(goal[0] - state.x, goal[1] - state.y) <= params.goal_tolerance:
            return "success", records
    return "timeout", []


def generate_dataset(params: DwaParams, world_cfg: WorldConfig, n_worlds: int,
                     seed: int, target_samples: int | None = None):
    """Harvest band demonstrations across procedurally generated worlds.

    Each world index gets its own child seed, so results are reproducible
    and independent of where the target-sample cutoff lands.
    Returns (obs (N,151), actions (N,3), stats).
    """
    root = np.random.SeedSequence(seed)
    obs_chunks: list[np.ndarray] = []
    act_chunks: list[np.ndarray] = []
    stats = HarvestStats()
    for widx in range(n_worlds):
        child = np.random.SeedSequence(entropy=root.entropy, spawn_key=(widx,))
        rng = np.random.default_rng(child)
        world_seed = int(rng.integers(0, 2**31 - 1))
        world = generate_world(world_cfg.kind, world_cfg.side,
                               world_cfg.n_obstacles, world_seed)
        stats.worlds += 1
        try:
            start, goal = sample_start_goal(world, rng, world_cfg.min_separation,
                                            world_cfg.clearance)
        except RuntimeError:
            stats.unplaceable += 1
            continue
        heading = rng.uniform(-np.pi, np.pi)
        outcome, records = run_expert_episode(world, start, goal, params,
                                              heading, world_cfg.max_steps)
        if outcome == "success":
            stats.successes += 1
            for obs, band in records:
                stats.executed_steps += 1
                if band.shape[0] == 0:
                    continue
                obs_chunks.append(np.repeat(obs[None, :], band.shape[0], axis=0))
                act_chunks.append(band)
                stats.samples += band.shape[0]
        elif outcome == "collision":
            stats.collisions += 1
        elif outcome == "timeout":
            stats.timeouts += 1
        else:
            stats.stops += 1
        if target_samples is not None and stats.samples >= target_samples:
            break
    if obs_chunks:
        obs = np.concatenate(obs_chunks, axis=0)
        acts = np.concatenate(act_chunks, axis=0)
    else:
        obs = np.zeros((0, OBS_DIM))
        acts = np.zeros((0, ACT_DIM))
    return obs, acts, stats


def write_dataset(path, obs: np.ndarray, actions: np.ndarray) -> None:
    obs = np.ascontiguousarray(obs, dtype="<f8")
    actions = np.ascontiguousarray(actions, dtype="<f8")
    if obs.ndim != 2 or obs.shape[1] != OBS_DIM:
        raise ValueError(f"obs must be (N, {OBS_DIM}), got {obs.shape}")
    if actions.shape != (obs.shape[0], ACT_DIM):
        raise ValueError(f"actions must be (N, {ACT_DIM}), got {actions.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", RECORD_LEN))
        fh.write(struct.pack("<Q", obs.shape[0]))
        np.hstack([obs, actions]).astype("<f8").tofile(fh)


def read_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, rec_len = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported dataset version {version}")
    if rec_len != RECORD_LEN:
        raise ValueError(f"{path}: record length {rec_len}, expected {RECORD_LEN}")
    (count,) = struct.unpack_from("<Q", raw, 12)
    data = np.frombuffer(raw, dtype="<f8", count=count * rec_len, offset=20)
    data = data.reshape(count, rec_len).astype(np.float64)
    return data[:, :OBS_DIM].copy(), data[:, OBS_DIM:].copy()


# ------------------------------------------------------- synthetic bimodal set


def build_tjunction_scene() -> tuple[World, AgentState, np.ndarray]:
    """T-junction: corridor toward a cross wall, goal behind the wall.

    Left and right both stay open, so turning either way is equally good;
    perfect raw material for a two-moded action distribution.
    """
    side = 12.0
    rects = np.array([
        [2.5, 2.75, 2.5, 2.75],    # lower-left block
        [9.5, 2.75, 2.5, 2.75],    # lower-right block
        [6.0, 7.15, 6.0, 0.15],    # cross wall
    ])
    world = World("corridor", side, 0, rects)
    agent = AgentState(6.0, 4.0, np.pi / 2.0, vx=1.0)
    goal = np.array([6.0, 10.0])
    return world, agent, goal


def make_bimodal_dataset(n: int, seed: int,
                         omega: float = 1.0, v_forward: float = 1.0):
    """Synthetic T-junction demonstrations with two action modes.

    Observations jitter around the scene's nominal pose; actions draw from
    clusters centered (v_forward, 0, +/-omega) with small isotropic spread.
    Returns (obs (n,151), actions (n,3)).
    """
    rng = np.random.default_rng(seed)
    world, nominal, goal = build_tjunction_scene()
    obs = np.empty((n, OBS_DIM))
    acts = np.empty((n, ACT_DIM))
    for i in range(n):
        state = AgentState(
            nominal.x + rng.normal(0.0, 0.1),
            nominal.y + rng.normal(0.0, 0.2),
            nominal.theta + rng.normal(0.0, 0.05),
            vx=v_forward + rng.normal(0.0, 0.1),
            vy=0.0,
            vyaw=rng.normal(0.0, 0.1),
        )
        obs[i] = observe_single(world, state, goal)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        acts[i, 0] = v_forward + rng.normal(0.0, 0.05)
        acts[i, 1] = rng.normal(0.0, 0.01)
        acts[i, 2] = sign * omega + rng.normal(0.0, 0.1)
    return obs, acts
