"""Clipped PPO update with GAE and an optional expert-guidance term.

The guidance term pulls the scaled deterministic action toward scale*v_ref
in physical velocity units; its weight lambda comes from the curriculum
schedule and the term is skipped entirely at lambda = 0, so a pure-RL run
produces bit-identical losses to standard PPO.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import (
    Var,
    backward,
    clip,
    clip_grad_norm,
    exp,
    minimum,
    mul,
    sigmoid,
    square,
    sub,
    vmean,
    vsum,
)
from .policy import PolicyNet

OBS_DIM = 151
ACT_DIM = 3


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    entropy_coef: float = 0.003
    value_coef: float = 0.5
    horizon: int = 64
    epochs: int = 4
    minibatches: int = 8
    grad_clip: float = 1.0
    lr_actor: float = 5e-4
    lr_critic: float = 1e-3
    lr_encoder: float = 1e-3


class RolloutBuffer:
    """horizon x n_envs transition store for one update."""

    def __init__(self, horizon: int, n_envs: int, obs_dim: int = OBS_DIM):
        self.horizon = horizon
        self.n_envs = n_envs
        self.obs = np.zeros((horizon, n_envs, obs_dim))
        self.v_ref = np.zeros((horizon, n_envs, ACT_DIM))
        self.pre = np.zeros((horizon, n_envs, ACT_DIM))
        self.logp = np.zeros((horizon, n_envs))
        self.value = np.zeros((horizon, n_envs))
        self.reward = np.zeros((horizon, n_envs))
        self.done = np.zeros((horizon, n_envs), dtype=bool)
        self.t = 0

    @property
    def full(self) -> bool:
        return self.t == self.horizon

    def add(self, obs, v_ref, pre, logp, value, reward, done) -> None:
        if self.full:
            raise RuntimeError("rollout buffer already full")
        t = self.t
        self.obs[t] = obs
        self.v_ref[t] = v_ref
        self.pre[t] = pre
        self.logp[t] = logp
        self.value[t] = value
        self.reward[t] = reward
        self.done[t] = done
        self.t += 1

    def reset(self) -> None:
        self.t = 0


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                last_value: np.ndarray, gamma: float,
                lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and returns over a (T, N) rollout.

    ``dones`` marks true terminals: no bootstrap across them.  ``last_value``
    is the critic's estimate for the state following the final row.
    """
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    carry = np.zeros(rewards.shape[1])
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - dones[t].astype(np.float64)
        next_value = last_value if t == T - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        carry = delta + gamma * lam * nonterminal * carry
        adv[t] = carry
    return adv, adv + values


def ppo_update(policy: PolicyNet, buffer: RolloutBuffer,
               last_value: np.ndarray, lam_guide: float, scale: float,
               cfg: PpoConfig, rng: np.random.Generator,
               optimizer) -> dict:
    """Run epochs x minibatches gradient steps on a full buffer."""
    if not buffer.full:
        raise RuntimeError("ppo_update needs a full rollout buffer")
    adv, ret = compute_gae(buffer.reward, buffer.value, buffer.done,
                           last_value, cfg.gamma, cfg.gae_lambda)
    batch = buffer.horizon * buffer.n_envs
    obs = buffer.obs.reshape(batch, -1)
    v_ref = buffer.v_ref.reshape(batch, ACT_DIM)
    pre = buffer.pre.reshape(batch, ACT_DIM)
    logp_old = buffer.logp.reshape(batch)
    adv = adv.reshape(batch)
    ret = ret.reshape(batch)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    mb_size = batch // cfg.minibatches
    if mb_size == 0:
        raise ValueError("batch smaller than minibatch count")
    sums = {"ppo_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
            "guide_loss": 0.0}
    steps = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(batch)
        for k in range(cfg.minibatches):
            mb = perm[k * mb_size:(k + 1) * mb_size]
            logp, entropy, value, mu_raw = policy.evaluate_var(
                obs[mb], v_ref[mb], pre[mb])
            ratio = exp(sub(logp, Var(logp_old[mb])))
            if not np.all(np.isfinite(ratio.value)):
                raise RuntimeError(
                    f"non-finite policy ratio at epoch {epoch} minibatch {k}"
                    "; lower the learning rates or check reward scaling")
            adv_c = Var(adv[mb])
            surr = minimum(
                mul(ratio, adv_c),
                mul(clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio),
                    adv_c))
            ppo_loss = -vmean(surr)
            value_loss = vmean(square(sub(value, Var(ret[mb]))))
            total = (ppo_loss + value_loss * cfg.value_coef
                     - entropy * cfg.entropy_coef)
            guide_val = 0.0
            if lam_guide > 0.0:
                v_final = mul(sub(mul(sigmoid(mu_raw), 2.0), 1.0),
                              Var(policy.v_lim))
                target = scale * v_ref[mb]
                guide = vmean(vsum(square(sub(v_final, Var(target))), axis=1))
                total = total + guide * lam_guide
                guide_val = float(guide.value)
            backward(total)
            clip_grad_norm(policy.parameters(), cfg.grad_clip)
            optimizer.step()
            policy.clamp_log_std()
            optimizer.zero_grad()
            sums["ppo_loss"] += float(ppo_loss.value)
            sums["value_loss"] += float(value_loss.value)
            sums["entropy"] += float(entropy.value)
            sums["guide_loss"] += guide_val
            steps += 1
    return {k: v / steps for k, v in sums.items()}
