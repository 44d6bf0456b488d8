"""Dynamic-window planner against an independent exhaustive oracle."""

import math

import numpy as np
import pytest

from cenav.backend import NUMBA_AVAILABLE
from cenav.dwa import (
    DwaParams,
    PlanResult,
    dynamic_window,
    evaluate_candidates,
    plan,
    rollout_arc,
    score_candidate,
)
from cenav.dwa import _dwa_eval_nb, _dwa_eval_np
from cenav.sim import AgentState, World, generate_world

from oracles import point_rect_distance, wrap_angle


# ------------------------------------------------------------------- oracle


def oracle_grid(lo, hi, res):
    n = max(1, int(math.floor((hi - lo) / res + 1e-9)) + 1)
    return [lo + res * k for k in range(n)]


def _rect_dist(px, py, cx, cy, hx, hy):
    # sqrt form, not hypot: must fold bits exactly like the planner kernel
    dx = max(abs(px - cx) - hx, 0.0)
    dy = max(abs(py - cy) - hy, 0.0)
    return math.sqrt(dx * dx + dy * dy)


def oracle_enumerate(state, goal, world, p):
    """Re-derive every candidate with plain Python loops.

    Returns list of (v, vy, w, score, rejected) in planner enumeration order.
    """
    v_lo = max(p.min_speed, state.vx + p.min_accel * p.dt)
    v_hi = min(p.max_speed, state.vx + p.max_accel * p.dt)
    w_lo = max(p.min_yaw_rate, state.vyaw - p.max_delta_yaw_rate * p.dt)
    w_hi = min(p.max_yaw_rate, state.vyaw + p.max_delta_yaw_rate * p.dt)
    n_steps = int(round(p.predict_time / p.dt))
    rows = []
    for v in oracle_grid(v_lo, v_hi, p.v_resolution):
        for vy in ([0.0] if not p.holonomic else oracle_grid(
                max(p.min_speed, state.vy + p.min_accel * p.dt),
                min(p.max_speed, state.vy + p.max_accel * p.dt), p.v_resolution)):
            for w in oracle_grid(w_lo, w_hi, p.yaw_rate_resolution):
                px, py, pth = state.x, state.y, state.theta
                min_clear = np.inf
                rejected = False
                for _ in range(n_steps):
                    px += (v * math.cos(pth) - vy * math.sin(pth)) * p.dt
                    py += (v * math.sin(pth) + vy * math.cos(pth)) * p.dt
                    pth += w * p.dt
                    d = min(
                        min((_rect_dist(px, py, *r) for r in world.rects),
                            default=np.inf),
                        px, world.side - px, py, world.side - py,
                    )
                    if d < p.robot_radius:
                        rejected = True
                        break
                    min_clear = min(min_clear, d - p.robot_radius)
                if rejected:
                    rows.append((v, vy, w, -np.inf, True))
                    continue
                diff = wrap_angle(math.atan2(goal[1] - py, goal[0] - px) - pth)
                gs = 1.0 - abs(diff) / np.pi
                ss = (v - p.min_speed) / (p.max_speed - p.min_speed)
                cs = min(min_clear / p.clearance_saturation, 1.0)
                rows.append((v, vy, w,
                             p.to_goal_gain * gs + p.speed_gain * ss + p.obstacle_gain * cs,
                             False))
    return rows


def oracle_plan(rows, delta):
    valid = [r for r in rows if not r[4]]
    if not valid:
        return None, []
    best_score = max(r[3] for r in valid)
    tied = [r for r in valid if r[3] == best_score]
    best = min(tied, key=lambda r: (abs(r[2]), r[0], abs(r[1])))
    band = [r for r in valid if r[3] >= (1.0 - delta) * best_score]
    return best, band


# -------------------------------------------------------------------- tests


def test_window_at_rest():
    p = DwaParams()
    lo, hi, wlo, whi = dynamic_window(AgentState(0, 0, 0), p)
    np.testing.assert_allclose([lo, hi], [-0.5, 0.15], atol=1e-12)
    np.testing.assert_allclose([wlo, whi], [-0.523, 0.523], atol=1e-12)


def test_window_clamped_by_absolute_limits():
    p = DwaParams()
    lo, hi, wlo, whi = dynamic_window(AgentState(0, 0, 0, vx=1.45, vyaw=1.5), p)
    assert hi == 1.5 and whi == 1.57
    np.testing.assert_allclose(lo, 0.95, atol=1e-12)


def test_rollout_straight_line():
    p = DwaParams()
    poses = rollout_arc(AgentState(0, 0, 0), 1.0, 0.0, 0.0, p)
    assert poses.shape == (10, 3)
    np.testing.assert_allclose(poses[:, 0], 0.1 * np.arange(1, 11), atol=1e-12)
    np.testing.assert_allclose(poses[:, 1], 0.0, atol=1e-15)


def test_rollout_arc_matches_stepwise_oracle():
    p = DwaParams()
    st = AgentState(2.0, 3.0, 0.7)
    poses = rollout_arc(st, 1.2, 0.0, 0.9, p)
    px, py, pth = st.x, st.y, st.theta
    for k in range(10):
        px += 1.2 * math.cos(pth) * 0.1
        py += 1.2 * math.sin(pth) * 0.1
        pth += 0.9 * 0.1
        np.testing.assert_array_equal(poses[k], [px, py, pth])


def test_score_components_sum_to_gain_total():
    # Open arena, goal dead ahead, top speed, clearance saturated: 1 + 15 + 0.5.
    world = World("forest", 40.0, 0, np.zeros((0, 4)))
    st = AgentState(20.0, 20.0, 0.0, vx=1.5)
    score, gs, ss, cs, rej = score_candidate(st, (35.0, 20.0), world, DwaParams(),
                                             v=1.5, w=0.0)
    assert not rej
    np.testing.assert_allclose([gs, ss, cs], [1.0, 1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(score, 16.5, atol=1e-12)


def test_plan_matches_exhaustive_oracle_on_random_scenes():
    rng = np.random.default_rng(77)
    p = DwaParams()
    checked_bands = 0
    for trial in range(20):
        world = generate_world("forest", 10.0, rng.integers(5, 20), seed=500 + trial)
        while True:
            pos = rng.uniform(1.0, 9.0, size=2)
            if not any(point_rect_distance(*pos, *r) < 0.3 for r in world.rects):
                break
        st = AgentState(pos[0], pos[1], rng.uniform(-np.pi, np.pi),
                        vx=rng.uniform(-0.4, 1.2), vyaw=rng.uniform(-1.0, 1.0))
        goal = rng.uniform(1.0, 9.0, size=2)
        rows = oracle_enumerate(st, goal, world, p)
        exp_best, exp_band = oracle_plan(rows, p.band_delta)
        got = plan(st, goal, world, p)
        if exp_best is None:
            assert got.emergency
            continue
        np.testing.assert_array_equal(got.best, exp_best[:3])
        exp_band_arr = np.array([[r[0], r[1], r[2]] for r in exp_band])
        assert got.band.shape == exp_band_arr.shape
        np.testing.assert_array_equal(got.band, exp_band_arr)
        checked_bands += 1
    assert checked_bands >= 15  # emergencies should be rare in these scenes


def test_speed_only_scoring_breaks_ties_toward_small_turn():
    p = DwaParams(to_goal_gain=0.0, obstacle_gain=0.0)
    world = World("forest", 40.0, 0, np.zeros((0, 4)))
    st = AgentState(20.0, 20.0, 0.0)
    res = plan(st, (30.0, 20.0), world, p)
    v_grid = oracle_grid(-0.5, 0.15, 0.1)
    w_grid = oracle_grid(-0.523, 0.523, 0.17)
    assert res.best[0] == max(v_grid)
    assert abs(res.best[2]) == min(abs(w) for w in w_grid)


def test_band_contains_best_and_respects_threshold():
    world = generate_world("forest", 10.0, 3, seed=9)
    st = AgentState(5.0, 5.0, 1.2, vx=0.5)
    res = plan(st, (8.0, 8.0), world, DwaParams())
    assert not res.emergency
    assert any(np.array_equal(row, res.best) for row in res.band)
    actions, scores, rejects, _ = evaluate_candidates(st, (8.0, 8.0), world,
                                                      DwaParams())
    in_band = {tuple(r) for r in res.band}
    for a, s, rej in zip(actions, scores, rejects):
        if tuple(a) in in_band:
            assert not rej and s >= 0.9 * res.best_score
        elif not rej:
            assert s < 0.9 * res.best_score


def test_emergency_stop_turns_toward_goal():
    # Dead end entered at full speed: every window candidate still moves >= 1.0
    # m/s for the whole horizon and collides.
    rects = np.array([
        [5.0, 6.0, 2.0, 0.2],    # wall ahead
        [4.3, 5.0, 0.2, 1.0],    # left wall
        [5.7, 5.0, 0.2, 1.0],    # right wall
    ])
    world = World("forest", 10.0, 0, rects)
    st = AgentState(5.0, 5.2, np.pi / 2, vx=1.5)
    res = plan(st, (2.0, 5.2), world, DwaParams())
    assert res.emergency
    assert res.n_valid == 0
    np.testing.assert_allclose(res.best, [0.0, 0.0, 0.785], atol=1e-12)
    res2 = plan(st, (8.0, 5.2), world, DwaParams())
    np.testing.assert_allclose(res2.best, [0.0, 0.0, -0.785], atol=1e-12)
    assert res.band.shape == (0, 3)


def test_holonomic_flag_enumerates_lateral_velocities():
    p = DwaParams(holonomic=True)
    world = World("forest", 40.0, 0, np.zeros((0, 4)))
    st = AgentState(20.0, 20.0, 0.0)
    actions, _, _, _ = evaluate_candidates(st, (30.0, 25.0), world, p)
    assert np.unique(actions[:, 1]).size > 1
    res = plan(st, (30.0, 25.0), world, p)
    assert res.best.shape == (3,)


def test_plan_deterministic():
    world = generate_world("forest", 10.0, 12, seed=31)
    st = AgentState(2.0, 2.0, 0.3, vx=0.8, vyaw=-0.2)
    a = plan(st, (8.0, 8.0), world, DwaParams())
    b = plan(st, (8.0, 8.0), world, DwaParams())
    np.testing.assert_array_equal(a.best, b.best)
    np.testing.assert_array_equal(a.band, b.band)
    assert a.best_score == b.best_score


@pytest.mark.skipif(not NUMBA_AVAILABLE, reason="numba backend not available")
def test_dwa_backends_bit_identical():
    rng = np.random.default_rng(4)
    p = DwaParams()
    for trial in range(5):
        world = generate_world("forest", 10.0, 15, seed=900 + trial)
        st = AgentState(*rng.uniform(1, 9, size=2), rng.uniform(-3, 3),
                        vx=rng.uniform(-0.5, 1.3), vyaw=rng.uniform(-1, 1))
        goal = rng.uniform(1, 9, size=2)
        v_lo, v_hi, w_lo, w_hi = dynamic_window(st, p)
        v_grid = np.array(oracle_grid(v_lo, v_hi, p.v_resolution))
        w_grid = np.array(oracle_grid(w_lo, w_hi, p.yaw_rate_resolution))
        vy_grid = np.zeros(1)
        n = v_grid.size * w_grid.size
        out = {}
        for name, fn in (("nb", _dwa_eval_nb), ("np", _dwa_eval_np)):
            scores = np.empty(n)
            rejects = np.zeros(n, dtype=np.bool_)
            comps = np.empty((3, n))
            fn(st.x, st.y, st.theta, goal[0], goal[1], world.rects, world.side,
               v_grid, vy_grid, w_grid, 10, p.dt, p.robot_radius,
               p.clearance_saturation, p.min_speed, p.max_speed,
               p.to_goal_gain, p.speed_gain, p.obstacle_gain,
               scores, rejects, comps)
            out[name] = (scores, rejects, comps)
        np.testing.assert_array_equal(out["nb"][1], out["np"][1])
        np.testing.assert_array_equal(out["nb"][0], out["np"][0])
        np.testing.assert_array_equal(out["nb"][2], out["np"][2])
