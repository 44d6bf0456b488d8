"""Fixed benchmark suites: per-density worlds plus frozen start-goal pairs.

Pairs that admit no collision-free path are resampled here, at creation
time, so evaluation never has to discard episodes.  The optimal length for
every pair is computed once and stored with it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..sim.world import World, generate_world, sample_start_goal
from .path import PathPlanner

log = logging.getLogger(__name__)

_FORMAT_TAG = "# cenav benchmark suite v1"


@dataclass(frozen=True)
class SuiteConfig:
    densities: tuple[int, ...] = (100, 300, 500, 700)
    side: float = 20.0
    kind: str = "forest"
    n_pairs: int = 100
    seed: int = 0
    min_separation: float = 8.0
    clearance: float = 0.5
    max_steps: int = 600
    goal_radius: float = 0.3
    # inflation radius for the shortest-path oracle; the largest shipped
    # footprint, so stored optima are valid lower bounds for every preset
    radius: float = 0.25
    cell: float = 0.1
    # benchmark cuboids are smaller than the training forests: at 700
    # obstacles in a 20 m arena the larger blocks jam the free space shut,
    # while this range keeps it adversarially dense but traversable
    half_extent_lo: float = 0.04
    half_extent_hi: float = 0.12


def fast_config(**overrides) -> SuiteConfig:
    """Quarter-size suite for desk runs and tests."""
    return replace(SuiteConfig(n_pairs=25), **overrides)


@dataclass
class TaskSet:
    starts: np.ndarray    # (n, 2)
    goals: np.ndarray     # (n, 2)
    headings: np.ndarray  # (n,)
    l_star: np.ndarray    # (n,) taut shortest-path lengths

    def __len__(self) -> int:
        return self.starts.shape[0]


@dataclass
class BenchmarkSuite:
    cfg: SuiteConfig
    world_seeds: dict = field(default_factory=dict)   # density -> int
    worlds: dict = field(default_factory=dict)        # density -> World
    tasks: dict = field(default_factory=dict)         # density -> TaskSet

    # ---------------------------------------------------------------- build

    @classmethod
    def build(cls, cfg: SuiteConfig) -> "BenchmarkSuite":
        suite = cls(cfg=cfg)
        for density in cfg.densities:
            world_seed = cfg.seed * 100003 + int(density)
            world = generate_world(cfg.kind, cfg.side, int(density), world_seed,
                                   half_extent_lo=cfg.half_extent_lo,
                                   half_extent_hi=cfg.half_extent_hi)
            planner = PathPlanner(world, cfg.radius, cfg.cell)
            rng = np.random.default_rng(
                np.random.SeedSequence(cfg.seed, spawn_key=(int(density),)))
            starts = np.empty((cfg.n_pairs, 2))
            goals = np.empty((cfg.n_pairs, 2))
            headings = np.empty(cfg.n_pairs)
            l_star = np.empty(cfg.n_pairs)
            budget = 50 * cfg.n_pairs
            for k in range(cfg.n_pairs):
                while True:
                    budget -= 1
                    if budget < 0:
                        raise RuntimeError(
                            f"density {density}: could not place "
                            f"{cfg.n_pairs} feasible pairs")
                    s, g = sample_start_goal(world, rng, cfg.min_separation,
                                             cfg.clearance)
                    length = planner.length(s, g)
                    if length is None:
                        log.info("density %d: pair %d unreachable, resampled",
                                 density, k)
                        continue
                    starts[k] = s
                    goals[k] = g
                    headings[k] = rng.uniform(-np.pi, np.pi)
                    l_star[k] = length
                    break
            suite.world_seeds[int(density)] = world_seed
            suite.worlds[int(density)] = world
            suite.tasks[int(density)] = TaskSet(starts, goals, headings, l_star)
        return suite

    # ------------------------------------------------------------------ io

    def save(self, path) -> None:
        cfg = self.cfg
        lines = [_FORMAT_TAG]
        for key in ("kind",):
            lines.append(f"{key} = {getattr(cfg, key)}")
        for key in ("side", "min_separation", "clearance", "goal_radius",
                    "radius", "cell", "half_extent_lo", "half_extent_hi"):
            lines.append(f"{key} = {getattr(cfg, key)!r}")
        for key in ("n_pairs", "seed", "max_steps"):
            lines.append(f"{key} = {getattr(cfg, key)}")
        lines.append("densities = " + ",".join(str(d) for d in cfg.densities))
        for density in cfg.densities:
            lines.append("")
            lines.append(f"[density {density}]")
            lines.append(f"world_seed = {self.world_seeds[density]}")
            ts = self.tasks[density]
            for k in range(len(ts)):
                row = (ts.starts[k, 0], ts.starts[k, 1], ts.goals[k, 0],
                       ts.goals[k, 1], ts.headings[k], ts.l_star[k])
                lines.append(" ".join(repr(float(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "BenchmarkSuite":
        text = Path(path).read_text().strip().splitlines()
        if not text or text[0] != _FORMAT_TAG:
            raise ValueError(f"{path}: not a benchmark suite file")
        scalars = {}
        i = 1
        while i < len(text) and not text[i].startswith("["):
            line = text[i].strip()
            i += 1
            if not line:
                continue
            key, _, val = line.partition("=")
            scalars[key.strip()] = val.strip()
        cfg = SuiteConfig(
            densities=tuple(int(d) for d in scalars["densities"].split(",")),
            side=float(scalars["side"]), kind=scalars["kind"],
            n_pairs=int(scalars["n_pairs"]), seed=int(scalars["seed"]),
            min_separation=float(scalars["min_separation"]),
            clearance=float(scalars["clearance"]),
            max_steps=int(scalars["max_steps"]),
            goal_radius=float(scalars["goal_radius"]),
            radius=float(scalars["radius"]), cell=float(scalars["cell"]),
            half_extent_lo=float(scalars["half_extent_lo"]),
            half_extent_hi=float(scalars["half_extent_hi"]))
        suite = cls(cfg=cfg)
        density = None
        rows = []

        def flush():
            if density is None:
                return
            arr = np.asarray(rows, dtype=np.float64).reshape(-1, 6)
            suite.tasks[density] = TaskSet(arr[:, 0:2].copy(), arr[:, 2:4].copy(),
                                           arr[:, 4].copy(), arr[:, 5].copy())

        while i < len(text):
            line = text[i].strip()
            i += 1
            if not line:
                continue
            if line.startswith("[density"):
                flush()
                density = int(line[len("[density"):-1])
                rows = []
            elif line.startswith("world_seed"):
                seed = int(line.partition("=")[2])
                suite.world_seeds[density] = seed
                suite.worlds[density] = generate_world(
                    cfg.kind, cfg.side, density, seed,
                    half_extent_lo=cfg.half_extent_lo,
                    half_extent_hi=cfg.half_extent_hi)
            else:
                rows.append([float(v) for v in line.split()])
        flush()
        missing = [d for d in cfg.densities if d not in suite.tasks]
        if missing:
            raise ValueError(f"{path}: densities {missing} missing task blocks")
        return suite
