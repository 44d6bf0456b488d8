"""Shortest-path oracle used to score navigation episodes.

Grid A* over the obstacle-inflated arena followed by string-pulling, so the
reported optimum is a taut polyline rather than a staircase.  This is setup
code that runs once per benchmark world; plain vectorized numpy is fast
enough and keeps it independent of the kernel backend.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from ..sim.world import World

CELL = 0.1
SQRT2 = math.sqrt(2.0)

# 8-connected neighborhood, cardinal moves first
_DIRS = ((1, 0), (-1, 0), (0, 1), (0, -1),
         (1, 1), (1, -1), (-1, 1), (-1, -1))


def clearance_points(points: np.ndarray, world: World) -> np.ndarray:
    """Distance from each point to the nearest obstacle or arena wall.

    Zero inside an obstacle.  Chunked so the (points x rects) broadcast
    stays small even for the 40k-point occupancy grids.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    out = np.full(pts.shape[0], np.inf)
    rects = world.rects
    if rects.shape[0]:
        for lo in range(0, pts.shape[0], 4096):
            p = pts[lo:lo + 4096]
            dx = np.abs(p[:, 0, None] - rects[None, :, 0]) - rects[None, :, 2]
            dy = np.abs(p[:, 1, None] - rects[None, :, 1]) - rects[None, :, 3]
            np.maximum(dx, 0.0, out=dx)
            np.maximum(dy, 0.0, out=dy)
            out[lo:lo + 4096] = np.sqrt(dx * dx + dy * dy).min(axis=1)
    wall = np.minimum(np.minimum(pts[:, 0], world.side - pts[:, 0]),
                      np.minimum(pts[:, 1], world.side - pts[:, 1]))
    return np.minimum(out, wall)


def occupancy_grid(world: World, radius: float, cell: float = CELL) -> np.ndarray:
    """Boolean (n, n) grid; True where a disc of `radius` cannot sit."""
    n = int(round(world.side / cell)) + 1
    ax = np.arange(n) * cell
    gx, gy = np.meshgrid(ax, ax, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return (clearance_points(pts, world) < radius).reshape(n, n)


def _octile(di: int, dj: int) -> float:
    a, b = abs(di), abs(dj)
    if a < b:
        a, b = b, a
    return a + (SQRT2 - 1.0) * b


def _snap(occ: np.ndarray, x: float, y: float, cell: float):
    """Nearest free cell to a point, searching a small ring if the exact
    cell is blocked by discretization."""
    n = occ.shape[0]
    i0 = min(max(int(round(x / cell)), 0), n - 1)
    j0 = min(max(int(round(y / cell)), 0), n - 1)
    best = None
    for r in range(3):
        for di in range(-r, r + 1):
            for dj in range(-r, r + 1):
                if max(abs(di), abs(dj)) != r:
                    continue
                i, j = i0 + di, j0 + dj
                if 0 <= i < n and 0 <= j < n and not occ[i, j]:
                    d = (i - x / cell) ** 2 + (j - y / cell) ** 2
                    if best is None or d < best[0]:
                        best = (d, i, j)
        if best is not None:
            return best[1], best[2]
    return None


def _astar(occ: np.ndarray, start, goal):
    """Cell path start -> goal on the free grid, or None.  Diagonal moves
    are allowed only when both flanking cardinal cells are free, so the
    path never cuts an inflated corner."""
    n = occ.shape[0]
    si, sj = start
    gi, gj = goal
    g = np.full((n, n), np.inf)
    g[si, sj] = 0.0
    came = {}
    heap = [(_octile(gi - si, gj - sj), si, sj)]
    while heap:
        f, i, j = heapq.heappop(heap)
        gc = g[i, j]
        if i == gi and j == gj:
            path = [(i, j)]
            while (i, j) in came:
                i, j = came[(i, j)]
                path.append((i, j))
            path.reverse()
            return path
        if f > gc + _octile(gi - i, gj - j) + 1e-9:
            continue  # stale heap entry
        for di, dj in _DIRS:
            ni, nj = i + di, j + dj
            if not (0 <= ni < n and 0 <= nj < n) or occ[ni, nj]:
                continue
            if di and dj and (occ[i + di, j] or occ[i, j + dj]):
                continue
            ng = gc + (SQRT2 if di and dj else 1.0)
            if ng < g[ni, nj]:
                g[ni, nj] = ng
                came[(ni, nj)] = (i, j)
                heapq.heappush(heap, (ng + _octile(gi - ni, gj - nj), ni, nj))
    return None


def _segment_clear(p0, p1, world: World, radius: float, step: float = 0.05) -> bool:
    d = float(np.linalg.norm(p1 - p0))
    n = max(int(math.ceil(d / step)), 1) + 1
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = p0[None, :] * (1.0 - t) + p1[None, :] * t
    return bool(np.all(clearance_points(pts, world) >= radius - 1e-9))


def _string_pull(pts: np.ndarray, world: World, radius: float) -> np.ndarray:
    """Replace the grid staircase with the longest mutually visible chords.

    Forward scan: extend the current chord while the next vertex stays
    visible, so the total clearance checks stay near-linear in path length.
    """
    last = pts.shape[0] - 1
    out = [pts[0]]
    i = 0
    while i < last:
        j = i + 1
        while j < last and _segment_clear(pts[i], pts[j + 1], world, radius):
            j += 1
        out.append(pts[j])
        i = j
    return np.asarray(out)


class PathPlanner:
    """Caches the inflated occupancy grid for one world so a suite of
    start-goal queries shares the expensive part."""

    def __init__(self, world: World, radius: float, cell: float = CELL):
        self.world = world
        self.radius = float(radius)
        self.cell = float(cell)
        self.occ = occupancy_grid(world, self.radius, self.cell)

    def length(self, start, goal) -> float | None:
        """Taut shortest-path length, or None when the goal is unreachable.

        Never below the straight-line distance: string pulling can only
        shorten toward that bound, the floor just absorbs float fuzz.
        """
        start = np.asarray(start, dtype=np.float64)
        goal = np.asarray(goal, dtype=np.float64)
        euclid = float(np.linalg.norm(goal - start))
        s = _snap(self.occ, start[0], start[1], self.cell)
        t = _snap(self.occ, goal[0], goal[1], self.cell)
        if s is None or t is None:
            return None
        cells = _astar(self.occ, s, t)
        if cells is None:
            return None
        pts = np.asarray(cells, dtype=np.float64) * self.cell
        pts[0] = start
        pts[-1] = goal
        pulled = _string_pull(pts, self.world, self.radius)
        length = float(np.sum(np.linalg.norm(np.diff(pulled, axis=0), axis=1)))
        return max(length, euclid)


def shortest_path_length(world: World, start, goal, radius: float,
                         cell: float = CELL) -> float | None:
    """One-shot convenience wrapper around PathPlanner."""
    return PathPlanner(world, radius, cell).length(start, goal)
