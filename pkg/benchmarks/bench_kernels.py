"""Backend benchmark: numba-compiled kernels vs the pure-numpy fallback.

The backend is fixed at import time, so the parent process launches one
worker per backend (CENAV_BACKEND set in the child environment) and merges
their timings into a comparison table.

Usage:
    python benchmarks/bench_kernels.py [--steps 2000] [--envs 64] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _measure(steps: int, n_envs: int, seed: int) -> dict:
    import numpy as np

    from cenav.backend import backend_name
    from cenav.embodiment import get_preset
    from cenav.rl.env import EnvConfig, VecNavEnv
    from cenav.sim.env import batch_step, observe_batch

    env = VecNavEnv(
        EnvConfig(n_envs=n_envs, side=20.0, n_obstacles=100, seed=seed),
        get_preset("ideal"))
    rng = np.random.default_rng(seed)
    cmds = rng.uniform(-1.0, 1.0, size=(steps, n_envs, 3))
    cmds[..., 2] *= 1.5

    # warm up JIT compilation and caches before any timer starts
    for k in range(20):
        env.step(cmds[k % steps])

    results = {"backend": backend_name(), "n_envs": n_envs, "steps": steps}

    radius = env.emb.footprint_radius
    t0 = time.perf_counter()
    for k in range(steps):
        batch_step(env.vec, cmds[k], env.wb, env.cfg.dt, radius,
                   env.cfg.goal_tolerance, env.cfg.max_steps)
        env.vec.status[:] = 0  # keep every env stepping
    results["batch_step"] = steps * n_envs / (time.perf_counter() - t0)

    t0 = time.perf_counter()
    for _ in range(steps):
        observe_batch(env.vec, env.wb)
    results["raycast"] = steps * n_envs / (time.perf_counter() - t0)

    t0 = time.perf_counter()
    for k in range(steps):
        batch_step(env.vec, cmds[k], env.wb, env.cfg.dt, radius,
                   env.cfg.goal_tolerance, env.cfg.max_steps)
        observe_batch(env.vec, env.wb)
        env.vec.status[:] = 0
    results["step_plus_raycast"] = steps * n_envs / (time.perf_counter() - t0)

    t0 = time.perf_counter()
    for k in range(steps):
        env.step(cmds[k])
    results["full_env_step"] = steps * n_envs / (time.perf_counter() - t0)
    return results


def _run_worker(backend: str, args) -> dict:
    env = dict(os.environ, CENAV_BACKEND=backend)
    cmd = [sys.executable, os.path.abspath(__file__), "--worker",
           "--steps", str(args.steps), "--envs", str(args.envs),
           "--seed", str(args.seed)]
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"{backend} worker failed:\n{proc.stderr}")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--envs", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", default=None, help="write merged results here")
    ap.add_argument("--worker", action="store_true",
                    help="internal: measure the current backend and print JSON")
    args = ap.parse_args()

    if args.worker:
        print(json.dumps(_measure(args.steps, args.envs, args.seed)))
        return 0

    rows = {}
    for backend in ("numba", "numpy"):
        try:
            rows[backend] = _run_worker(backend, args)
        except RuntimeError as exc:
            print(f"skipping {backend}: {exc}", file=sys.stderr)
    if not rows:
        print("no backend produced results", file=sys.stderr)
        return 1

    names = ("batch_step", "raycast", "step_plus_raycast", "full_env_step")
    print(f"{args.envs} envs, {args.steps} timed steps, env-steps/s "
          "(higher is better)")
    header = f"{'kernel':<20}" + "".join(f"{b:>14}" for b in rows)
    if len(rows) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for name in names:
        line = f"{name:<20}"
        for backend in rows:
            line += f"{rows[backend][name]:>14,.0f}"
        if len(rows) == 2:
            line += f"{rows['numba'][name] / rows['numpy'][name]:>9.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w") as f:
            json.dump(rows, f, indent=2)
        print(f"wrote {args.json}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
