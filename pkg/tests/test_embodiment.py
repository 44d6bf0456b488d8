"""Controller emulator family: scale math, lag/delay/noise dynamics, presets."""

import numpy as np
import pytest

from cenav.embodiment import (
    EXPERT_LIMITS,
    EmbodimentSpec,
    PRESETS,
    VecTracker,
    compute_scale,
    get_preset,
    load_embodiment,
    make_tracker_state,
    save_embodiment,
    tracker_step,
    tracking_error,
    variant,
)


def run_tracker(spec, commands, dt=0.1, seed=0):
    st = make_tracker_state(spec, seed)
    out = []
    for c in commands:
        st, a = tracker_step(spec, st, c, dt)
        out.append(a)
    return np.array(out)


# ---------------------------------------------------------------- scale math


def test_scale_conservative_axis_wins():
    s = compute_scale(EXPERT_LIMITS, (0.75, 0.5, 1.0))
    assert s == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_scale_identity_and_fast_robot():
    assert compute_scale(EXPERT_LIMITS, EXPERT_LIMITS) == 1.0
    assert compute_scale(EXPERT_LIMITS, (3.0, 3.0, 3.14)) == 2.0


def test_scale_rejects_bad_limits():
    with pytest.raises(ValueError):
        compute_scale((1.5, 0.0, 1.57), (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        compute_scale(EXPERT_LIMITS, (1.0, -0.1, 1.0))
    with pytest.raises(ValueError):
        compute_scale((1.5, 1.5), (1.0, 1.0, 1.0))


def test_scaled_commands_always_inside_limits():
    rng = np.random.default_rng(0)
    emb = np.array([0.75, 0.5, 1.0])
    s = compute_scale(EXPERT_LIMITS, emb)
    v = rng.uniform(-1.0, 1.0, size=(100_000, 3)) * np.array(EXPERT_LIMITS)
    assert np.all(np.abs(s * v) <= emb[None, :] + 1e-12)


# ------------------------------------------------------------------ dynamics


def test_ideal_tracker_is_identity_on_clamped_commands():
    spec = EmbodimentSpec("t", (1.0, 0.5, 1.0))
    rng = np.random.default_rng(3)
    cmds = rng.uniform(-2.0, 2.0, size=(20, 3))
    out = run_tracker(spec, cmds)
    np.testing.assert_array_equal(out, np.clip(cmds, -spec.limits_array,
                                               spec.limits_array))


def test_first_order_lag_single_step():
    spec = EmbodimentSpec("t", (1.5, 1.5, 1.57), tau=0.5)
    st = make_tracker_state(spec)
    _, a = tracker_step(spec, st, (1.0, 0.0, 0.0), dt=0.1)
    assert abs(a[0] - 0.2) < 1e-15
    assert a[1] == 0.0 and a[2] == 0.0


def test_lag_converges_geometrically():
    spec = EmbodimentSpec("t", (1.5, 1.5, 1.57), tau=0.5)
    out = run_tracker(spec, [(1.0, 0.0, 0.0)] * 30)
    expected = 1.0 - 0.8 ** np.arange(1, 31)
    np.testing.assert_allclose(out[:, 0], expected, atol=1e-12)


def test_pipeline_delay_outputs_queue_zeros_first():
    spec = EmbodimentSpec("t", (1.5, 1.5, 1.57), delay_steps=2)
    out = run_tracker(spec, [(1.0, 0.0, 0.0)] * 5)
    np.testing.assert_array_equal(out[:, 0], [0.0, 0.0, 1.0, 1.0, 1.0])


def test_sub_dt_time_constant_snaps_instead_of_ringing():
    spec = EmbodimentSpec("t", (1.5, 1.5, 1.57), tau=0.05)
    out = run_tracker(spec, [(1.0, 0.0, 0.0)] * 4, dt=0.1)
    np.testing.assert_array_equal(out[:, 0], [1.0, 1.0, 1.0, 1.0])


def test_coupling_leaks_forward_speed_into_lateral():
    spec = EmbodimentSpec("t", (1.5, 1.5, 1.57), coupling=0.1)
    _, a = tracker_step(spec, make_tracker_state(spec), (1.0, 0.0, 0.0), 0.1)
    assert a[1] == pytest.approx(0.1, abs=1e-15)


def test_noise_is_seed_deterministic():
    spec = EmbodimentSpec("t", (1.5, 1.5, 1.57), noise_std=0.05)
    cmds = [(1.0, 0.2, -0.5)] * 10
    a = run_tracker(spec, cmds, seed=7)
    b = run_tracker(spec, cmds, seed=7)
    c = run_tracker(spec, cmds, seed=8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_achieved_never_exceeds_limits():
    spec = get_preset("sluggish")
    vt = VecTracker(spec, 1000, seed=1)
    rng = np.random.default_rng(2)
    for _ in range(100):
        out = vt.step(rng.uniform(-10.0, 10.0, size=(1000, 3)), dt=0.1)
        assert np.all(np.abs(out) <= spec.limits_array[None, :] + 1e-12)


def test_vec_tracker_matches_scalar_tracker():
    spec = EmbodimentSpec("t", (1.0, 0.6, 1.2), tau=0.3, delay_steps=2,
                          coupling=0.05)
    rng = np.random.default_rng(5)
    cmds = rng.uniform(-1.5, 1.5, size=(20, 4, 3))
    vt = VecTracker(spec, 4)
    vec_out = np.array([vt.step(cmds[t], dt=0.1) for t in range(20)])
    for e in range(4):
        scalar = run_tracker(spec, cmds[:, e], dt=0.1)
        np.testing.assert_array_equal(vec_out[:, e], scalar)


def test_vec_tracker_reset_is_per_env():
    spec = EmbodimentSpec("t", (1.5, 1.5, 1.57), tau=0.4, delay_steps=1)
    vt = VecTracker(spec, 3)
    for _ in range(5):
        vt.step(np.ones((3, 3)), dt=0.1)
    before = vt.achieved.copy()
    vt.reset_envs(np.array([1]))
    assert np.all(vt.achieved[1] == 0.0) and np.all(vt.queue[:, 1] == 0.0)
    np.testing.assert_array_equal(vt.achieved[[0, 2]], before[[0, 2]])


# ------------------------------------------------------------ tracking error


def test_tracking_error_zero_for_ideal():
    spec = get_preset("ideal")
    rng = np.random.default_rng(11)
    profile = rng.uniform(-1.0, 1.0, size=(40, 3))
    assert tracking_error(spec, profile, dt=0.1) == 0.0


def test_tracking_error_matches_discrete_lag_sum():
    spec = EmbodimentSpec("t", (1.5, 1.5, 1.57), tau=0.5)
    err = tracking_error(spec, [(1.0, 0.0, 0.0)] * 50, dt=0.1)
    # distance deficit of a = 1 - 0.8^k sampled after each update
    expected = 0.1 * np.sum(0.8 ** np.arange(1, 51))
    assert err == pytest.approx(expected, abs=1e-12)
    assert err == pytest.approx(0.3999943, abs=1e-6)


def test_tracking_error_approaches_continuous_lag_integral():
    # tau*v*(1 - e^(-T/tau)) for tau=0.5, v=1, T=5 is about 0.49995
    spec = EmbodimentSpec("t", (1.5, 1.5, 1.57), tau=0.5)
    err = tracking_error(spec, [(1.0, 0.0, 0.0)] * 5000, dt=0.001)
    cont = 0.5 * (1.0 - np.exp(-10.0))
    assert err == pytest.approx(cont, rel=0.01)


def test_tracking_error_rejects_empty_profile():
    with pytest.raises(ValueError):
        tracking_error(get_preset("ideal"), np.zeros((0, 3)), dt=0.1)


def test_doubling_noise_does_not_reduce_mean_error():
    base = EmbodimentSpec("t", (1.5, 1.5, 1.57), noise_std=0.02)
    loud = variant(base, noise_std=0.04)
    profile = [(1.0, 0.0, 0.0)] * 50
    errs = {
        spec.noise_std: np.mean([tracking_error(spec, profile, 0.1, seed=s)
                                 for s in range(100)])
        for spec in (base, loud)
    }
    assert errs[0.04] >= errs[0.02]


def test_presets_ordered_by_tracking_error():
    profile = [(1.0, 0.0, 0.0)] * 50
    names = ["crisp", "nimble", "standard", "heavy", "sluggish"]
    means = [
        np.mean([tracking_error(get_preset(n), profile, 0.1, seed=s)
                 for s in range(40)])
        for n in names
    ]
    assert all(a < b for a, b in zip(means, means[1:])), dict(zip(names, means))
    assert tracking_error(get_preset("ideal"), profile, 0.1) == 0.0


def test_preset_lookup_and_validation():
    assert get_preset("standard").name == "standard"
    with pytest.raises(KeyError, match="sluggish"):
        get_preset("wobbly")
    with pytest.raises(ValueError):
        EmbodimentSpec("bad", (1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        EmbodimentSpec("bad", (1.0, 1.0, 1.0), tau=-0.1)


# --------------------------------------------------------------------- files


def test_spec_file_round_trip(tmp_path):
    for name in PRESETS:
        path = tmp_path / f"{name}.emb"
        save_embodiment(path, PRESETS[name])
        assert load_embodiment(path) == PRESETS[name]


def test_spec_file_error_reporting(tmp_path):
    path = tmp_path / "bad.emb"
    path.write_text("name = x\nwheelbase = 2\n")
    with pytest.raises(ValueError, match="unknown key"):
        load_embodiment(path)
    path.write_text("name = x\n")
    with pytest.raises(ValueError, match="missing keys"):
        load_embodiment(path)
    path.write_text("name = x\nname = y\n")
    with pytest.raises(ValueError, match="duplicate"):
        load_embodiment(path)
    path.write_text("just some words\n")
    with pytest.raises(ValueError, match="key = value"):
        load_embodiment(path)
