"""Ablation runner: train and score the guidance variants side by side.

Every trained variant gets the same PPO step budget, environment and seed;
only the guidance source and the blending schedule differ.  The
guidance-execution variants skip training entirely, so their training-time
column is zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..embodiment import EXPERT_LIMITS, EmbodimentSpec, compute_scale
from ..rl.env import EnvConfig
from ..rl.policy import PolicyNet, scale_action
from ..rl.ppo import PpoConfig
from ..rl.train import CurriculumSchedule, _clamp_ref, train_refiner
from .bench import Report, run_benchmark
from .suite import BenchmarkSuite

log = logging.getLogger(__name__)

VARIANTS = ("full", "pure-rl", "static-0.5", "regr-rl",
            "ge-only-flow", "ge-only-regr")


class NullProposals:
    """Stands in for the expert when training must see no guidance at all:
    the reference slot of the state is held at zero."""

    def sample_rows(self, obs: np.ndarray, rng) -> np.ndarray:
        return np.zeros((np.atleast_2d(obs).shape[0], 3))

    def parameters(self):
        return []


class RegressorProposals:
    """Adapts the deterministic baseline to the expert sampling interface;
    the rng is accepted but unused."""

    def __init__(self, regressor):
        self.regressor = regressor

    def sample_rows(self, obs: np.ndarray, rng) -> np.ndarray:
        return self.regressor.predict(obs)

    def parameters(self):
        return self.regressor.parameters()


def refined_policy_fn(policy, proposals):
    """Deterministic rollout policy: propose, condition, squash, scale."""

    def fn(obs, rng):
        v_ref = _clamp_ref(proposals.sample_rows(obs, rng))
        v_norm = policy.act_deterministic(policy.guided_state(obs, v_ref))
        return scale_action(v_norm, policy.v_lim)

    return fn


def guidance_only_policy_fn(proposals, scale: float, v_limits):
    """Execute scaled proposals directly, no learned refinement."""
    v_limits = np.asarray(v_limits, dtype=np.float64)

    def fn(obs, rng):
        v = scale * _clamp_ref(proposals.sample_rows(obs, rng))
        return np.clip(v, -v_limits, v_limits)

    return fn


@dataclass(frozen=True)
class AblationConfig:
    variants: tuple = VARIANTS
    n_updates: int = 300
    env: EnvConfig | None = None        # derived from the suite when None
    ppo: PpoConfig = field(default_factory=PpoConfig)
    seed: int = 0
    densities: tuple | None = None      # suite subset to score
    bench_seed: int = 0
    chunk_size: int = 100
    # refiner network sizes, same for every trained variant
    embed_dim: int = 256
    hidden: int = 256


@dataclass
class AblationResult:
    rows: list                 # flat dicts, one per variant
    reports: dict              # variant -> Report

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(self.rows[0].keys())
            for row in self.rows:
                w.writerow(row.values())


def _schedule_for(name: str) -> CurriculumSchedule:
    if name == "full":
        return CurriculumSchedule()
    if name == "pure-rl":
        return CurriculumSchedule(lambda_init=0.0, lambda_final=0.0)
    if name == "static-0.5":
        return CurriculumSchedule(lambda_init=0.5, lambda_final=0.5)
    if name == "regr-rl":
        return CurriculumSchedule()
    raise ValueError(f"unknown trained variant {name!r}")


def run_ablation(expert, regressor, emb: EmbodimentSpec,
                 suite: BenchmarkSuite, cfg: AblationConfig) -> AblationResult:
    """Returns one scored row per variant in cfg.variants.

    expert: trained flow model; regressor: trained deterministic baseline.
    Unknown variant names raise rather than silently skipping.
    """
    unknown = [v for v in cfg.variants if v not in VARIANTS]
    if unknown:
        raise ValueError(f"unknown ablation variants {unknown}")
    densities = cfg.densities or suite.cfg.densities
    env_cfg = cfg.env or EnvConfig(side=suite.cfg.side,
                                   n_obstacles=int(densities[0]),
                                   seed=cfg.seed)
    scale = compute_scale(EXPERT_LIMITS, emb.v_limits)
    rows = []
    reports = {}
    for name in cfg.variants:
        log.info("ablation variant %s", name)
        if name.startswith("ge-only"):
            proposals = (RegressorProposals(regressor)
                         if name == "ge-only-regr" else expert)
            policy_fn = guidance_only_policy_fn(proposals, scale, emb.v_limits)
            ett_hours = 0.0
        else:
            proposals = (RegressorProposals(regressor) if name == "regr-rl"
                         else NullProposals() if name == "pure-rl"
                         else expert)
            policy = PolicyNet(seed=cfg.seed, embed_dim=cfg.embed_dim,
                               hidden=cfg.hidden, v_lim=emb.v_limits)
            result = train_refiner(
                proposals, emb, env_cfg=env_cfg, ppo_cfg=cfg.ppo,
                sched=_schedule_for(name), n_updates=cfg.n_updates,
                seed=cfg.seed, policy=policy)
            policy_fn = refined_policy_fn(result.policy, proposals)
            ett_hours = result.ett_seconds / 3600.0
        report = run_benchmark(policy_fn, suite, emb, densities=densities,
                               seed=cfg.bench_seed, chunk_size=cfg.chunk_size)
        report.ett_hours = ett_hours
        reports[name] = report
        row = {"variant": name, "ett_hours": ett_hours}
        for d in densities:
            row[f"sr_{d}"] = report.sr[d]
            row[f"spl_{d}"] = report.spl[d]
        row["msr"] = report.msr
        row["mspl"] = report.mspl
        rows.append(row)
        log.info("variant %s: %s", name, report.summary())
    return AblationResult(rows=rows, reports=reports)
