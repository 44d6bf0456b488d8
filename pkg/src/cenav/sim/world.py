"""Procedural obstacle worlds and their text serialization."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

KINDS = ("forest", "corridor")


@dataclass
class World:
    """Square arena [0, side]^2 with axis-aligned rectangular obstacles."""

    kind: str
    side: float
    seed: int
    rects: np.ndarray  # (N, 4) rows cx, cy, hx, hy
    _ptr: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.rects = np.ascontiguousarray(self.rects, dtype=np.float64).reshape(-1, 4)
        self._ptr = np.array([0, self.rects.shape[0]], dtype=np.int64)

    @property
    def n_obstacles(self) -> int:
        return self.rects.shape[0]


def generate_world(kind: str, side: float, n_obstacles: int, seed: int,
                   half_extent_lo: float = 0.1, half_extent_hi: float = 0.6,
                   corridor_width: float = 3.0, wall_thickness: float = 0.3,
                   block_extent_hi: float = 0.3) -> World:
    """Deterministic world from (kind, side, n, seed).

    forest: n uniformly placed rectangles with half-extents in
    [half_extent_lo, half_extent_hi], each fully inside the arena.
    corridor: two full-length wall strips leaving a channel of
    corridor_width around the centerline, plus n interior blocks.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown world kind {kind!r}")
    rng = np.random.default_rng(seed)
    rows = []
    if kind == "forest":
        for _ in range(n_obstacles):
            hx = rng.uniform(half_extent_lo, half_extent_hi)
            hy = rng.uniform(half_extent_lo, half_extent_hi)
            cx = rng.uniform(hx, side - hx)
            cy = rng.uniform(hy, side - hy)
            rows.append((cx, cy, hx, hy))
    else:
        mid = side / 2.0
        off = corridor_width / 2.0 + wall_thickness / 2.0
        rows.append((mid, mid + off, side / 2.0, wall_thickness / 2.0))
        rows.append((mid, mid - off, side / 2.0, wall_thickness / 2.0))
        for _ in range(n_obstacles):
            hx = rng.uniform(half_extent_lo, block_extent_hi)
            hy = rng.uniform(half_extent_lo, block_extent_hi)
            cx = rng.uniform(hx, side - hx)
            cy = rng.uniform(mid - corridor_width / 2.0 + hy,
                             mid + corridor_width / 2.0 - hy)
            rows.append((cx, cy, hx, hy))
    rects = np.array(rows, dtype=np.float64).reshape(-1, 4)
    return World(kind, float(side), int(seed), rects)


def world_to_file(world: World, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{world.side:.17g} {world.n_obstacles} {world.seed} {world.kind}"]
    for cx, cy, hx, hy in world.rects:
        lines.append(f"{cx:.17g} {cy:.17g} {hx:.17g} {hy:.17g}")
    path.write_text("\n".join(lines) + "\n")


def world_from_file(path) -> World:
    text = Path(path).read_text().strip().splitlines()
    head = text[0].split()
    if len(head) != 4:
        raise ValueError(f"{path}: bad world header {text[0]!r}")
    side, n, seed, kind = float(head[0]), int(head[1]), int(head[2]), head[3]
    if kind not in KINDS:
        raise ValueError(f"{path}: unknown world kind {kind!r}")
    rects = np.array([[float(v) for v in line.split()] for line in text[1:]],
                     dtype=np.float64).reshape(-1, 4)
    if rects.shape[0] != n:
        raise ValueError(f"{path}: header says {n} obstacles, file has {rects.shape[0]}")
    return World(kind, side, seed, rects)


def free_at(world: World, x: float, y: float, clearance: float) -> bool:
    """True when the point keeps >= clearance from every obstacle and wall."""
    d = kernels.clearance_batch(np.array([[x, y]]), world.rects, world._ptr, world.side)
    return bool(d[0] >= clearance)


def sample_start_goal(world: World, rng: np.random.Generator,
                      min_separation: float, clearance: float,
                      max_attempts: int = 10000) -> tuple[np.ndarray, np.ndarray]:
    """Rejection-sample a collision-free start/goal pair.

    Raises RuntimeError after max_attempts rejected draws; dense worlds are
    reported rather than silently looping forever.
    """
    start = None
    for _ in range(max_attempts):
        x = rng.uniform(0.0, world.side)
        y = rng.uniform(0.0, world.side)
        if not free_at(world, x, y, clearance):
            continue
        if start is None:
            start = np.array([x, y])
            continue
        p = np.array([x, y])
        if np.hypot(*(p - start)) >= min_separation:
            return start, p
    raise RuntimeError(
        f"no start/goal pair with clearance {clearance} and separation "
        f"{min_separation} found in {max_attempts} attempts "
        f"(kind={world.kind}, n={world.n_obstacles}, side={world.side})"
    )
