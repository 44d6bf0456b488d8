"""Refiner actor-critic over the guided state (embedding plus reference velocity).

Actions live in [0,1] per axis via a sigmoid squash of a Gaussian; the final
command is an affine map of that onto the embodiment's velocity box.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..flow.model import EMBED_DIM, StateEncoder
from ..nn import (
    MLP,
    Parameter,
    Var,
    concat,
    div,
    exp,
    load_checkpoint,
    mul,
    reshape,
    save_checkpoint,
    square,
    sub,
    vsum,
)

ACT_DIM = 3
LOG_2PI = float(np.log(2.0 * np.pi))
LOG_STD_MIN = -4.0
LOG_STD_MAX = 1.0


def scale_action(v_norm: np.ndarray, v_lim) -> np.ndarray:
    """Map [0,1] per-axis actions onto the symmetric velocity box."""
    v_norm = np.asarray(v_norm, dtype=np.float64)
    if np.any(v_norm < 0.0) or np.any(v_norm > 1.0):
        warnings.warn("v_norm outside [0,1]; clamping", RuntimeWarning)
        v_norm = np.clip(v_norm, 0.0, 1.0)
    return np.asarray(v_lim, dtype=np.float64) * (2.0 * v_norm - 1.0)


def _np_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _np_softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


class PolicyNet:
    """Shared encoder feeding a squashed-Gaussian actor and a value head."""

    def __init__(self, seed: int = 0, embed_dim: int = EMBED_DIM,
                 hidden: int = 256, v_lim=(1.5, 1.5, 1.57)):
        rng = np.random.default_rng(seed)
        self.embed_dim = embed_dim
        self.hidden = hidden
        self.v_lim = np.asarray(v_lim, dtype=np.float64)
        self.encoder = StateEncoder(rng, embed_dim)
        g = embed_dim + ACT_DIM
        self.actor = MLP([g, hidden, hidden, ACT_DIM],
                         hidden_activation="tanh", rng=rng)
        # small head keeps the initial policy near the midpoint command
        self.actor.layers[-1].w.value *= 0.01
        self.critic = MLP([g, hidden, hidden, 1],
                          hidden_activation="tanh", rng=rng)
        self.log_std = Parameter(np.full(ACT_DIM, -0.5))

    # -------------------------------------------------------- rollout path

    def guided_state(self, obs: np.ndarray, v_ref: np.ndarray) -> np.ndarray:
        emb = self.encoder.forward(obs)
        return np.concatenate([emb, np.atleast_2d(v_ref)], axis=1)

    def act(self, guided: np.ndarray, rng: np.random.Generator):
        """Sample actions; returns (v_norm, pre_squash, log_prob, value)."""
        guided = np.atleast_2d(guided)
        mu = self.actor.forward(guided)
        std = np.exp(self.log_std.value)[None, :]
        pre = mu + std * rng.standard_normal(mu.shape)
        v_norm = _np_sigmoid(pre)
        logp = self.log_prob_of_pre(pre, mu, std)
        value = self.critic.forward(guided)[:, 0]
        return v_norm, pre, logp, value

    def act_deterministic(self, guided: np.ndarray) -> np.ndarray:
        return _np_sigmoid(self.actor.forward(np.atleast_2d(guided)))

    @staticmethod
    def log_prob_of_pre(pre, mu, std) -> np.ndarray:
        """Density of the squashed action expressed via its pre-squash point."""
        z = (pre - mu) / std
        gauss = -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(std), axis=1) \
            - 0.5 * ACT_DIM * LOG_2PI
        # d(sigmoid)/dx = v(1-v); change of variables adds -log of that
        jac = np.sum(_np_softplus(pre) + _np_softplus(-pre), axis=1)
        return gauss + jac

    def value(self, guided: np.ndarray) -> np.ndarray:
        return self.critic.forward(np.atleast_2d(guided))[:, 0]

    # --------------------------------------------------------- update path

    def evaluate_var(self, obs: np.ndarray, v_ref: np.ndarray,
                     pre: np.ndarray):
        """Tape forward for an update minibatch.

        Returns (log_prob (B,), entropy scalar, value (B,), mu_raw (B,3)),
        all differentiable wrt encoder/actor/critic/log_std.
        """
        emb = self.encoder.forward_var(obs)
        guided = concat([emb, Var(np.atleast_2d(v_ref))], axis=1)
        mu = self.actor.forward_var(guided)
        pre_c = Var(np.atleast_2d(pre))
        z = div(sub(pre_c, mu), exp(self.log_std))
        gauss = (mul(vsum(square(z), axis=1), Var(np.array(-0.5)))
                 - vsum(self.log_std)
                 + Var(np.array(-0.5 * ACT_DIM * LOG_2PI)))
        logp = gauss + Var(np.sum(_np_softplus(pre) + _np_softplus(-pre), axis=1))
        entropy = vsum(self.log_std) + Var(
            np.array(0.5 * ACT_DIM * (1.0 + LOG_2PI)))
        value = reshape(self.critic.forward_var(guided), (-1,))
        return logp, entropy, value, mu

    def clamp_log_std(self) -> None:
        np.clip(self.log_std.value, LOG_STD_MIN, LOG_STD_MAX,
                out=self.log_std.value)

    # ----------------------------------------------------------- parameters

    def actor_parameters(self) -> list[Parameter]:
        return self.actor.parameters() + [self.log_std]

    def critic_parameters(self) -> list[Parameter]:
        return self.critic.parameters()

    def encoder_parameters(self) -> list[Parameter]:
        return self.encoder.parameters()

    def parameters(self) -> list[Parameter]:
        return (self.encoder_parameters() + self.actor_parameters()
                + self.critic_parameters())

    def named_parameters(self) -> dict[str, Parameter]:
        named = self.encoder.named_parameters()
        for tag, mlp in (("actor", self.actor), ("critic", self.critic)):
            for i, layer in enumerate(mlp.layers):
                named[f"{tag}.fc{i}.w"] = layer.w
                named[f"{tag}.fc{i}.b"] = layer.b
        named["log_std"] = self.log_std
        return named

    def n_params(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def save(self, path) -> None:
        sections = {k: p.value for k, p in self.named_parameters().items()}
        sections["meta.arch"] = np.array([self.embed_dim, self.hidden],
                                         dtype=np.float64)
        sections["meta.v_lim"] = self.v_lim
        save_checkpoint(path, sections)

    @classmethod
    def load(cls, path) -> "PolicyNet":
        sections = load_checkpoint(path)
        embed, hidden = (int(v) for v in sections["meta.arch"])
        policy = cls(seed=0, embed_dim=embed, hidden=hidden,
                     v_lim=sections["meta.v_lim"])
        for name, param in policy.named_parameters().items():
            param.value = sections[name].reshape(param.value.shape)
        return policy
