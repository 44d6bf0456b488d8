"""Benchmark execution: roll a policy over a frozen suite, score SR/SPL.

Success means reaching the goal disc with zero collisions; path efficiency
weighs each success by the ratio of the stored optimum to the distance
actually traveled.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from ..embodiment import EmbodimentSpec
from ..rl.env import VecNavEnv
from ..sim.env import EpisodeStatus
from .suite import BenchmarkSuite

# trajectory rows dumped per step
TRAJ_COLUMNS = ("t", "x", "y", "theta", "vx", "vy", "vyaw", "reward")


@dataclass
class EpisodeRecord:
    success: bool
    path_length: float
    l_star: float
    steps: int
    collision: bool
    trajectory: np.ndarray | None = None  # (T, 8) rows TRAJ_COLUMNS

    def __post_init__(self):
        if self.success and self.collision:
            raise ValueError("an episode cannot both succeed and collide")
        if self.l_star <= 0:
            raise ValueError("l_star must be positive")


def spl(records) -> float:
    """Success weighted by path efficiency, averaged over the set."""
    records = list(records)
    if not records:
        raise ValueError("spl over an empty record set")
    total = 0.0
    for r in records:
        if r.success:
            total += r.l_star / max(r.path_length, r.l_star)
    return total / len(records)


@dataclass
class Report:
    densities: tuple
    sr: dict                       # density -> success rate
    spl: dict                      # density -> path-efficiency score
    n_episodes: dict
    msr: float
    mspl: float
    ett_hours: float = 0.0         # training time, attached by the caller
    eval_seconds: float = 0.0      # wall clock of this evaluation
    records: dict = field(default_factory=dict)

    def summary(self) -> str:
        per = "  ".join(
            f"N={d}: SR={self.sr[d]:.3f} SPL={self.spl[d]:.4f}"
            for d in self.densities)
        return (f"{per}  |  mSR={self.msr:.3f} mSPL={self.mspl:.4f} "
                f"ETT={self.ett_hours:.2f}h eval={self.eval_seconds:.1f}s")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(("density", "sr", "spl"))
            for d in self.densities:
                w.writerow((d, repr(self.sr[d]), repr(self.spl[d])))
            w.writerow(("mean", repr(self.msr), repr(self.mspl)))


def write_trajectories(report: Report, out_dir) -> list:
    """One CSV per recorded episode; returns the paths written."""
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for density in report.densities:
        for k, rec in enumerate(report.records.get(density, [])):
            if rec.trajectory is None:
                continue
            p = out_dir / f"traj_d{density}_{k:04d}.csv"
            with open(p, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(TRAJ_COLUMNS)
                for row in rec.trajectory:
                    w.writerow([repr(float(v)) for v in row])
            paths.append(p)
    return paths


def run_benchmark(policy_fn, suite: BenchmarkSuite, emb: EmbodimentSpec,
                  densities=None, seed: int = 0, chunk_size: int = 100,
                  record_trajectories: bool = False, dt: float = 0.1) -> Report:
    """Score `policy_fn(obs, rng) -> (E, 3) commands` on every suite pair.

    Episodes run in fixed-task batches with no auto-reset; the per-chunk
    rng is derived from (seed, density, chunk), so a rerun with the same
    arguments reproduces the report exactly.
    """
    cfg = suite.cfg
    if densities is None:
        densities = cfg.densities
    densities = tuple(int(d) for d in densities)
    t0 = time.perf_counter()
    sr = {}
    spl_by_density = {}
    n_eps = {}
    all_records = {}
    for density in densities:
        world = suite.worlds[density]
        ts = suite.tasks[density]
        records = []
        for ci, lo in enumerate(range(0, len(ts), chunk_size)):
            sl = slice(lo, min(lo + chunk_size, len(ts)))
            k = sl.stop - sl.start
            env = VecNavEnv.from_tasks(
                [world] * k, ts.starts[sl], ts.goals[sl], ts.headings[sl],
                emb, dt=dt, goal_tolerance=cfg.goal_radius,
                max_steps=cfg.max_steps, seed=seed)
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(density, ci)))
            obs = env.observe()
            path_len = np.zeros(k)
            trajs = [[] for _ in range(k)] if record_trajectories else None
            t = 0
            while np.any(env.vec.status == int(EpisodeStatus.RUNNING)):
                active = env.vec.status == int(EpisodeStatus.RUNNING)
                pos_prev = env.vec.pos.copy()
                v_cmd = np.asarray(policy_fn(obs, rng), dtype=np.float64)
                obs, reward, _, info = env.step(v_cmd)
                path_len += np.linalg.norm(env.vec.pos - pos_prev, axis=1)
                if record_trajectories:
                    va = info["v_actual"]
                    for e in np.flatnonzero(active):
                        trajs[e].append((t * dt, env.vec.pos[e, 0],
                                         env.vec.pos[e, 1], env.vec.theta[e],
                                         va[e, 0], va[e, 1], va[e, 2],
                                         reward[e]))
                t += 1
            status = env.vec.status
            for e in range(k):
                records.append(EpisodeRecord(
                    success=bool(status[e] == int(EpisodeStatus.REACHED_GOAL)),
                    path_length=float(path_len[e]),
                    l_star=float(ts.l_star[sl][e]),
                    steps=int(env.vec.steps[e]),
                    collision=bool(status[e] == int(EpisodeStatus.COLLIDED)),
                    trajectory=(np.asarray(trajs[e])
                                if record_trajectories else None)))
        sr[density] = float(np.mean([r.success for r in records]))
        spl_by_density[density] = spl(records)
        n_eps[density] = len(records)
        all_records[density] = records
    return Report(
        densities=densities, sr=sr, spl=spl_by_density, n_episodes=n_eps,
        msr=float(np.mean([sr[d] for d in densities])),
        mspl=float(np.mean([spl_by_density[d] for d in densities])),
        eval_seconds=time.perf_counter() - t0,
        records=all_records)
