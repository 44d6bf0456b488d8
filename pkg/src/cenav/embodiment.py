"""Parametric low-level controller emulators.

A velocity command passes through a pipeline delay, a per-axis first-order
lag, lateral coupling, multiplicative noise, and a final clamp.  The family
is deliberately small but spans everything from a pass-through tracker to a
laggy, saturated, noisy one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np


EXPERT_LIMITS = (1.5, 1.5, 1.57)


@dataclass(frozen=True)
class EmbodimentSpec:
    name: str
    v_limits: tuple[float, float, float]    # per-axis |v| maxima (x, y, yaw)
    tau: float = 0.0                        # lag time constant, seconds
    delay_steps: int = 0
    noise_std: float = 0.0                  # multiplicative, per axis
    coupling: float = 0.0                   # fraction of v_x leaking into v_y
    footprint_radius: float = 0.2

    def __post_init__(self):
        if any(l <= 0.0 for l in self.v_limits):
            raise ValueError(f"{self.name}: velocity limits must be positive")
        if self.tau < 0.0 or self.delay_steps < 0 or self.noise_std < 0.0:
            raise ValueError(f"{self.name}: tau/delay/noise must be nonnegative")

    @property
    def limits_array(self) -> np.ndarray:
        return np.asarray(self.v_limits, dtype=np.float64)


@dataclass
class TrackerState:
    achieved: np.ndarray                    # (3,)
    queue: np.ndarray                       # (delay_steps, 3) FIFO, oldest first
    rng: np.random.Generator


def make_tracker_state(spec: EmbodimentSpec, seed: int = 0) -> TrackerState:
    return TrackerState(
        achieved=np.zeros(3),
        queue=np.zeros((spec.delay_steps, 3)),
        rng=np.random.default_rng(seed),
    )


def compute_scale(expert_limits, emb_limits) -> float:
    """Most conservative per-axis ratio of embodiment to expert limits."""
    e = np.asarray(expert_limits, dtype=np.float64)
    m = np.asarray(emb_limits, dtype=np.float64)
    if e.shape != (3,) or m.shape != (3,):
        raise ValueError("limits must be 3-vectors")
    if np.any(e <= 0.0) or np.any(m <= 0.0):
        raise ValueError("limits must be positive")
    return float(np.min(m / e))


def _lag_blend(tau: float, dt: float) -> float:
    # Euler lag step; blend capped at 1 so tau < dt snaps instead of ringing
    if tau <= 0.0:
        return 1.0
    return min(dt / tau, 1.0)


def tracker_step(spec: EmbodimentSpec, st: TrackerState, commanded,
                 dt: float) -> tuple[TrackerState, np.ndarray]:
    """Advance the emulator one step; returns (new state, achieved velocity).

    The achieved velocity is also the persistent lag state, so saturation and
    noise feed back into the next step's dynamics.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    commanded = np.asarray(commanded, dtype=np.float64)
    lim = spec.limits_array
    if spec.delay_steps > 0:
        cmd = st.queue[0].copy()
        queue = np.vstack([st.queue[1:], commanded[None, :]])
    else:
        cmd = commanded.copy()
        queue = st.queue
    alpha = _lag_blend(spec.tau, dt)
    a = st.achieved + alpha * (np.clip(cmd, -lim, lim) - st.achieved)
    a[1] += spec.coupling * a[0]
    if spec.noise_std > 0.0:
        a = a * (1.0 + st.rng.normal(0.0, spec.noise_std, size=3))
    a = np.clip(a, -lim, lim)
    return TrackerState(a, queue, st.rng), a.copy()


class VecTracker:
    """One emulator per environment, stepped as a batch.

    The noise draw covers every env each step whether or not it is active,
    so per-env resets never shift another env's random stream.
    """

    def __init__(self, spec: EmbodimentSpec, n_envs: int, seed: int = 0):
        self.spec = spec
        self.n_envs = n_envs
        self.achieved = np.zeros((n_envs, 3))
        self.queue = np.zeros((spec.delay_steps, n_envs, 3))
        self.rng = np.random.default_rng(seed)

    def reset_envs(self, idx) -> None:
        self.achieved[idx] = 0.0
        if self.queue.shape[0]:
            self.queue[:, idx] = 0.0

    def step(self, commands: np.ndarray, dt: float) -> np.ndarray:
        spec = self.spec
        lim = spec.limits_array
        if spec.delay_steps > 0:
            cmd = self.queue[0].copy()
            self.queue[:-1] = self.queue[1:]
            self.queue[-1] = commands
        else:
            cmd = np.asarray(commands, dtype=np.float64)
        alpha = _lag_blend(spec.tau, dt)
        a = self.achieved + alpha * (np.clip(cmd, -lim, lim) - self.achieved)
        a[:, 1] += spec.coupling * a[:, 0]
        if spec.noise_std > 0.0:
            a = a * (1.0 + self.rng.normal(0.0, spec.noise_std, size=a.shape))
        np.clip(a, -lim, lim, out=a)
        self.achieved = a
        return a.copy()


def tracking_error(spec: EmbodimentSpec, command_profile, dt: float,
                   seed: int = 0) -> float:
    """Final-position gap between the commanded and the achieved trajectory.

    Both trajectories start at the origin and integrate body-frame velocities
    the same way the simulator does (translate with the pre-step heading,
    then rotate).
    """
    profile = np.atleast_2d(np.asarray(command_profile, dtype=np.float64))
    if profile.shape[0] == 0:
        raise ValueError("command profile must be nonempty")
    st = make_tracker_state(spec, seed)
    ref = np.zeros(3)       # x, y, theta of the intended trajectory
    act = np.zeros(3)
    for c in profile:
        st, a = tracker_step(spec, st, c, dt)
        for pose, vel in ((ref, c), (act, a)):
            cth, sth = np.cos(pose[2]), np.sin(pose[2])
            pose[0] += (vel[0] * cth - vel[1] * sth) * dt
            pose[1] += (vel[0] * sth + vel[1] * cth) * dt
            pose[2] += vel[2] * dt
    return float(np.hypot(ref[0] - act[0], ref[1] - act[1]))


# ------------------------------------------------------------------ presets

# Ordered easy-to-hard; tracking error on a fixed profile grows down the list.
PRESETS: dict[str, EmbodimentSpec] = {
    "ideal": EmbodimentSpec("ideal", (1.5, 1.5, 1.57)),
    "crisp": EmbodimentSpec("crisp", (1.5, 1.5, 1.57), tau=0.05,
                            noise_std=0.005, footprint_radius=0.15),
    "nimble": EmbodimentSpec("nimble", (1.2, 0.8, 1.3), tau=0.15,
                             delay_steps=1, noise_std=0.01, coupling=0.02,
                             footprint_radius=0.18),
    "standard": EmbodimentSpec("standard", (1.0, 0.6, 1.2), tau=0.3,
                               delay_steps=1, noise_std=0.02, coupling=0.05,
                               footprint_radius=0.2),
    "heavy": EmbodimentSpec("heavy", (0.9, 0.5, 1.0), tau=0.45,
                            delay_steps=2, noise_std=0.03, coupling=0.08,
                            footprint_radius=0.24),
    "sluggish": EmbodimentSpec("sluggish", (0.75, 0.5, 1.0), tau=0.6,
                               delay_steps=3, noise_std=0.05, coupling=0.1,
                               footprint_radius=0.25),
}


def get_preset(name: str) -> EmbodimentSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown embodiment preset {name!r}; "
            f"available: {', '.join(PRESETS)}") from None


def variant(base: EmbodimentSpec, **overrides) -> EmbodimentSpec:
    return replace(base, **overrides)


# -------------------------------------------------------------------- files

_FILE_KEYS = ("name", "vx_max", "vy_max", "vyaw_max", "tau", "delay_steps",
              "noise_std", "coupling", "radius")


def save_embodiment(path, spec: EmbodimentSpec) -> None:
    vals = {
        "name": spec.name,
        "vx_max": spec.v_limits[0],
        "vy_max": spec.v_limits[1],
        "vyaw_max": spec.v_limits[2],
        "tau": spec.tau,
        "delay_steps": spec.delay_steps,
        "noise_std": spec.noise_std,
        "coupling": spec.coupling,
        "radius": spec.footprint_radius,
    }
    lines = []
    for key in _FILE_KEYS:
        v = vals[key]
        lines.append(f"{key} = {v:.17g}" if isinstance(v, float)
                     else f"{key} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_embodiment(path) -> EmbodimentSpec:
    vals: dict[str, str] = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FILE_KEYS:
            raise ValueError(f"{path}:{ln}: unknown key {key!r}")
        if key in vals:
            raise ValueError(f"{path}:{ln}: duplicate key {key!r}")
        vals[key] = value.strip()
    missing = [k for k in _FILE_KEYS if k not in vals]
    if missing:
        raise ValueError(f"{path}: missing keys {missing}")
    return EmbodimentSpec(
        name=vals["name"],
        v_limits=(float(vals["vx_max"]), float(vals["vy_max"]),
                  float(vals["vyaw_max"])),
        tau=float(vals["tau"]),
        delay_steps=int(vals["delay_steps"]),
        noise_std=float(vals["noise_std"]),
        coupling=float(vals["coupling"]),
        footprint_radius=float(vals["radius"]),
    )
