"""Geometry kernels: raycasting, collision sweeps, clearance queries.

Every kernel exists twice: a scalar-loop version compiled with numba and a
vectorized numpy fallback.  ``cenav.backend`` picks one pair at import time;
both evaluate the same IEEE expressions (no fastmath) so results agree to
rounding.  Batched entry points take worlds in CSR form: one flat rectangle
array plus per-env offsets, which lets every environment carry a different
obstacle count.

Rectangles are rows (cx, cy, hx, hy): center and half-extents, axis aligned.
The square [0, side]^2 acts as an outer wall for both rays and collisions.
"""

from __future__ import annotations

import math

import numpy as np

from ..backend import USE_NUMBA, jit_kernel

N_RAYS = 144
MAX_RANGE = 4.0
_TINY = 1e-300


# ---------------------------------------------------------------- numba path


@jit_kernel(cache=True)
def _point_rect_dist_nb(px, py, rects, start, stop):
    best = np.inf
    for r in range(start, stop):
        dx = abs(px - rects[r, 0]) - rects[r, 2]
        if dx < 0.0:
            dx = 0.0
        dy = abs(py - rects[r, 1]) - rects[r, 3]
        if dy < 0.0:
            dy = 0.0
        d = math.sqrt(dx * dx + dy * dy)
        if d < best:
            best = d
    return best


@jit_kernel(cache=True)
def _boundary_dist_nb(px, py, side):
    d = px
    if side - px < d:
        d = side - px
    if py < d:
        d = py
    if side - py < d:
        d = side - py
    return d


@jit_kernel(cache=True)
def _inside_any_nb(px, py, rects, keep, k):
    for j in range(k):
        r = keep[j]
        if abs(px - rects[r, 0]) < rects[r, 2] and abs(py - rects[r, 1]) < rects[r, 3]:
            return True
    return False


@jit_kernel(cache=True)
def _cull_beyond_nb(px, py, rects, start, stop, limit, keep):
    """Indices of rects whose AABB comes within limit of the point.

    Rays are clamped to max_range, so rects entirely beyond it can never
    change the output; dropping them up front spares every ray the slab
    divisions."""
    k = 0
    lim2 = limit * limit
    for r in range(start, stop):
        ddx = abs(px - rects[r, 0]) - rects[r, 2]
        if ddx < 0.0:
            ddx = 0.0
        ddy = abs(py - rects[r, 1]) - rects[r, 3]
        if ddy < 0.0:
            ddy = 0.0
        if ddx * ddx + ddy * ddy <= lim2:
            keep[k] = r
            k += 1
    return k


@jit_kernel(cache=True)
def _ray_hit_nb(ox, oy, dx, dy, rects, keep, k):
    """Min slab-test hit distance over kept rects; inf when nothing is hit."""
    best = np.inf
    for j in range(k):
        r = keep[j]
        lox = rects[r, 0] - rects[r, 2]
        hix = rects[r, 0] + rects[r, 2]
        loy = rects[r, 1] - rects[r, 3]
        hiy = rects[r, 1] + rects[r, 3]
        if abs(dx) < _TINY:
            if ox < lox or ox > hix:
                continue
            txmin = -np.inf
            txmax = np.inf
        else:
            t1 = (lox - ox) / dx
            t2 = (hix - ox) / dx
            if t1 < t2:
                txmin, txmax = t1, t2
            else:
                txmin, txmax = t2, t1
        if abs(dy) < _TINY:
            if oy < loy or oy > hiy:
                continue
            tymin = -np.inf
            tymax = np.inf
        else:
            t1 = (loy - oy) / dy
            t2 = (hiy - oy) / dy
            if t1 < t2:
                tymin, tymax = t1, t2
            else:
                tymin, tymax = t2, t1
        tmin = txmin if txmin > tymin else tymin
        tmax = txmax if txmax < tymax else tymax
        if tmax < tmin or tmax < 0.0:
            continue
        hit = tmin if tmin > 0.0 else 0.0
        if hit < best:
            best = hit
    return best


@jit_kernel(cache=True)
def _boundary_exit_nb(ox, oy, dx, dy, side):
    t_exit = np.inf
    if abs(dx) >= _TINY:
        t1 = (0.0 - ox) / dx
        t2 = (side - ox) / dx
        t = t1 if t1 > t2 else t2
        if t < t_exit:
            t_exit = t
    if abs(dy) >= _TINY:
        t1 = (0.0 - oy) / dy
        t2 = (side - oy) / dy
        t = t1 if t1 > t2 else t2
        if t < t_exit:
            t_exit = t
    return t_exit


@jit_kernel(cache=True)
def _raycast_csr_nb(pos, heading, rects, ptr, side, n_rays, max_range, out, inside):
    two_pi = 2.0 * np.pi
    keep = np.empty(rects.shape[0], np.int64)
    for e in range(pos.shape[0]):
        px = pos[e, 0]
        py = pos[e, 1]
        start = ptr[e]
        stop = ptr[e + 1]
        k = _cull_beyond_nb(px, py, rects, start, stop, max_range, keep)
        if _inside_any_nb(px, py, rects, keep, k):
            for i in range(n_rays):
                out[e, i] = 0.0
            inside[e] = True
            continue
        inside[e] = False
        for i in range(n_rays):
            ang = heading[e] + two_pi * i / n_rays
            dx = math.cos(ang)
            dy = math.sin(ang)
            d = _ray_hit_nb(px, py, dx, dy, rects, keep, k)
            b = _boundary_exit_nb(px, py, dx, dy, side)
            if b < d:
                d = b
            if d > max_range:
                d = max_range
            out[e, i] = d


@jit_kernel(cache=True)
def _clearance_csr_nb(pos, rects, ptr, side, out):
    for e in range(pos.shape[0]):
        d = _point_rect_dist_nb(pos[e, 0], pos[e, 1], rects, ptr[e], ptr[e + 1])
        b = _boundary_dist_nb(pos[e, 0], pos[e, 1], side)
        out[e] = d if d < b else b


@jit_kernel(cache=True)
def _sweep_csr_nb(pos, disp, rects, ptr, side, radius, active, out_pos, collided):
    """Move each active env along disp with sub-steps capped at radius."""
    for e in range(pos.shape[0]):
        out_pos[e, 0] = pos[e, 0]
        out_pos[e, 1] = pos[e, 1]
        collided[e] = False
        if not active[e]:
            continue
        dx = disp[e, 0]
        dy = disp[e, 1]
        dist = math.sqrt(dx * dx + dy * dy)
        n_sub = 1
        if dist > radius:
            n_sub = int(math.ceil(dist / radius))
        start = ptr[e]
        stop = ptr[e + 1]
        for k in range(1, n_sub + 1):
            f = k / n_sub
            qx = pos[e, 0] + dx * f
            qy = pos[e, 1] + dy * f
            d = _point_rect_dist_nb(qx, qy, rects, start, stop)
            b = _boundary_dist_nb(qx, qy, side)
            if b < d:
                d = b
            out_pos[e, 0] = qx
            out_pos[e, 1] = qy
            if d < radius:
                collided[e] = True
                break


# ---------------------------------------------------------------- numpy path


def _slab_intervals_np(o, d, lo, hi):
    """Per-axis slab entry/exit times; d (n,1) against bounds (R,)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo[None, :] - o) / d
        t2 = (hi[None, :] - o) / d
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    deg = np.abs(d[:, 0]) < _TINY
    if np.any(deg):
        in_slab = (o >= lo[None, :]) & (o <= hi[None, :])
        tmin[deg] = np.where(in_slab, -np.inf, np.inf)
        tmax[deg] = np.where(in_slab, np.inf, -np.inf)
    return tmin, tmax


def _raycast_csr_np(pos, heading, rects, ptr, side, n_rays, max_range, out, inside):
    two_pi = 2.0 * np.pi
    rel = two_pi * np.arange(n_rays) / n_rays
    for e in range(pos.shape[0]):
        px, py = pos[e]
        sub = rects[ptr[e]:ptr[e + 1]]
        if sub.shape[0]:
            # same cull as the compiled twin: out-of-range rects clamp away
            ddx = np.maximum(np.abs(px - sub[:, 0]) - sub[:, 2], 0.0)
            ddy = np.maximum(np.abs(py - sub[:, 1]) - sub[:, 3], 0.0)
            sub = sub[ddx * ddx + ddy * ddy <= max_range * max_range]
        if sub.shape[0] and np.any(
            (np.abs(px - sub[:, 0]) < sub[:, 2]) & (np.abs(py - sub[:, 1]) < sub[:, 3])
        ):
            out[e, :] = 0.0
            inside[e] = True
            continue
        inside[e] = False
        ang = heading[e] + rel
        dx = np.cos(ang)[:, None]
        dy = np.sin(ang)[:, None]
        if sub.shape[0]:
            txmin, txmax = _slab_intervals_np(px, dx, sub[:, 0] - sub[:, 2], sub[:, 0] + sub[:, 2])
            tymin, tymax = _slab_intervals_np(py, dy, sub[:, 1] - sub[:, 3], sub[:, 1] + sub[:, 3])
            tmin = np.maximum(txmin, tymin)
            tmax = np.minimum(txmax, tymax)
            hit = (tmax >= tmin) & (tmax >= 0.0)
            dists = np.where(hit, np.maximum(tmin, 0.0), np.inf)
            best = dists.min(axis=1)
        else:
            best = np.full(n_rays, np.inf)
        with np.errstate(divide="ignore"):
            bx = np.where(np.abs(dx[:, 0]) >= _TINY,
                          np.maximum((0.0 - px) / dx[:, 0], (side - px) / dx[:, 0]), np.inf)
            by = np.where(np.abs(dy[:, 0]) >= _TINY,
                          np.maximum((0.0 - py) / dy[:, 0], (side - py) / dy[:, 0]), np.inf)
        out[e, :] = np.minimum(np.minimum(best, np.minimum(bx, by)), max_range)


def _point_rect_dist_np(px, py, sub):
    if sub.shape[0] == 0:
        return np.inf
    dx = np.maximum(np.abs(px - sub[:, 0]) - sub[:, 2], 0.0)
    dy = np.maximum(np.abs(py - sub[:, 1]) - sub[:, 3], 0.0)
    return float(np.min(np.sqrt(dx * dx + dy * dy)))


def _clearance_csr_np(pos, rects, ptr, side, out):
    for e in range(pos.shape[0]):
        d = _point_rect_dist_np(pos[e, 0], pos[e, 1], rects[ptr[e]:ptr[e + 1]])
        b = min(pos[e, 0], side - pos[e, 0], pos[e, 1], side - pos[e, 1])
        out[e] = min(d, b)


def _sweep_csr_np(pos, disp, rects, ptr, side, radius, active, out_pos, collided):
    out_pos[:] = pos
    collided[:] = False
    for e in range(pos.shape[0]):
        if not active[e]:
            continue
        dx, dy = disp[e]
        dist = math.sqrt(dx * dx + dy * dy)
        n_sub = int(math.ceil(dist / radius)) if dist > radius else 1
        sub = rects[ptr[e]:ptr[e + 1]]
        for k in range(1, n_sub + 1):
            f = k / n_sub
            qx = pos[e, 0] + dx * f
            qy = pos[e, 1] + dy * f
            d = _point_rect_dist_np(qx, qy, sub)
            b = min(qx, side - qx, qy, side - qy)
            out_pos[e] = (qx, qy)
            if min(d, b) < radius:
                collided[e] = True
                break


# ------------------------------------------------------------------ dispatch

if USE_NUMBA:
    _raycast_csr = _raycast_csr_nb
    _clearance_csr = _clearance_csr_nb
    _sweep_csr = _sweep_csr_nb
else:
    _raycast_csr = _raycast_csr_np
    _clearance_csr = _clearance_csr_np
    _sweep_csr = _sweep_csr_np


def raycast_batch(pos, heading, rects, ptr, side, n_rays=N_RAYS, max_range=MAX_RANGE):
    """Lidar sweep for a batch of poses; returns (distances (E, n_rays), inside (E,)).

    Ray i leaves at heading + 2*pi*i/n_rays.  Distances are meters, capped at
    max_range; a pose inside an obstacle yields an all-zero row and its
    inside flag set.
    """
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    heading = np.ascontiguousarray(heading, dtype=np.float64)
    rects = np.ascontiguousarray(rects, dtype=np.float64).reshape(-1, 4)
    ptr = np.ascontiguousarray(ptr, dtype=np.int64)
    out = np.empty((pos.shape[0], n_rays))
    inside = np.zeros(pos.shape[0], dtype=np.bool_)
    _raycast_csr(pos, heading, rects, ptr, float(side), n_rays, float(max_range), out, inside)
    return out, inside


def clearance_batch(pos, rects, ptr, side):
    """Min distance from each point to any rectangle or the outer wall."""
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    rects = np.ascontiguousarray(rects, dtype=np.float64).reshape(-1, 4)
    ptr = np.ascontiguousarray(ptr, dtype=np.int64)
    out = np.empty(pos.shape[0])
    _clearance_csr(pos, rects, ptr, float(side), out)
    return out


def sweep_batch(pos, disp, rects, ptr, side, radius, active):
    """Sub-stepped translation with collision detection.

    Displacements longer than the body radius are split so a fast agent
    cannot tunnel through a thin wall.  Returns (final positions, collided);
    a colliding env stops at the offending sub-step position.
    """
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    disp = np.ascontiguousarray(disp, dtype=np.float64)
    rects = np.ascontiguousarray(rects, dtype=np.float64).reshape(-1, 4)
    ptr = np.ascontiguousarray(ptr, dtype=np.int64)
    active = np.ascontiguousarray(active, dtype=np.bool_)
    out_pos = np.empty_like(pos)
    collided = np.zeros(pos.shape[0], dtype=np.bool_)
    _sweep_csr(pos, disp, rects, ptr, float(side), float(radius), active, out_pos, collided)
    return out_pos, collided


def warmup_kernels():
    """Trigger JIT compilation so timing runs exclude compile cost."""
    rects = np.array([[2.0, 2.0, 0.5, 0.5]])
    ptr = np.array([0, 1], dtype=np.int64)
    raycast_batch(np.array([[1.0, 1.0]]), np.array([0.5]), rects, ptr, 4.0, n_rays=8)
    clearance_batch(np.array([[1.0, 1.0]]), rects, ptr, 4.0)
    sweep_batch(np.array([[1.0, 1.0]]), np.array([[0.3, 0.0]]), rects, ptr, 4.0, 0.2,
                np.array([True]))
