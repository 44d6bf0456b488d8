"""Conditional Real-NVP velocity expert and its deterministic baseline.

The expert is a 3-d flow conditioned on a shared state embedding.  Coupling
layers split the action vector at a moving pivot, so every dimension gets
transformed under several different conditioning patterns across the stack.
Numpy forward paths serve sampling and evaluation; tape paths serve training.
"""

from __future__ import annotations

import numpy as np

from ..nn import (
    Conv1dLayer,
    DenseLayer,
    Parameter,
    Var,
    concat,
    exp,
    load_checkpoint,
    mul,
    neg,
    reshape,
    save_checkpoint,
    slice_cols,
    square,
    sub,
    tanh,
    vsum,
)

OBS_DIM = 151
N_RAYS = 144
STATE_DIM = OBS_DIM - N_RAYS
ACT_DIM = 3
EMBED_DIM = 256
FLOW_LAYERS = 12
FLOW_HIDDEN = 512
LOG_2PI = float(np.log(2.0 * np.pi))

# (pivot, transform side) per layer, cycled; "right" transforms the columns
# at and after the pivot.  The cycle hits every dim under both roles.
_MASK_CYCLE = ((1, "right"), (1, "left"), (2, "right"), (2, "left"))


class StateEncoder:
    """144 rays through a strided circular conv stack, joined with the 7 state
    scalars, to a fixed-width embedding."""

    def __init__(self, rng: np.random.Generator, embed_dim: int = EMBED_DIM):
        self.embed_dim = embed_dim
        self.convs = [
            Conv1dLayer(1, 8, 5, stride=2, activation="relu", rng=rng),
            Conv1dLayer(8, 16, 5, stride=2, activation="relu", rng=rng),
            Conv1dLayer(16, 16, 5, stride=2, activation="relu", rng=rng),
        ]
        flat = 16 * (N_RAYS // 8)
        self.fc = [
            DenseLayer(flat + STATE_DIM, embed_dim, activation="relu", rng=rng),
            DenseLayer(embed_dim, embed_dim, activation="identity", rng=rng),
        ]

    def _check(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.ndim == 1:
            obs = obs[None, :]
        if obs.ndim != 2 or obs.shape[1] != OBS_DIM:
            raise ValueError(f"observation must be (B, {OBS_DIM}), got {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise ValueError("observation contains non-finite values")
        return obs

    def forward(self, obs: np.ndarray) -> np.ndarray:
        obs = self._check(obs)
        h = obs[:, :N_RAYS][:, None, :]
        for conv in self.convs:
            h = conv.forward(h)
        h = np.concatenate([h.reshape(h.shape[0], -1), obs[:, N_RAYS:]], axis=1)
        for fc in self.fc:
            h = fc.forward(h)
        return h

    def forward_var(self, obs: np.ndarray) -> Var:
        obs = self._check(obs)
        h = Var(obs[:, :N_RAYS][:, None, :], requires_grad=False)
        for conv in self.convs:
            h = conv.forward_var(h)
        flat = reshape(h, (h.value.shape[0], -1))
        h = concat([flat, Var(obs[:, N_RAYS:], requires_grad=False)], axis=1)
        for fc in self.fc:
            h = fc.forward_var(h)
        return h

    def parameters(self) -> list[Parameter]:
        out = []
        for layer in self.convs + self.fc:
            out.extend(layer.parameters())
        return out

    def named_parameters(self, prefix: str = "encoder") -> dict[str, Parameter]:
        named = {}
        for i, conv in enumerate(self.convs):
            named[f"{prefix}.conv{i}.k"] = conv.kernels
            named[f"{prefix}.conv{i}.b"] = conv.bias
        for i, fc in enumerate(self.fc):
            named[f"{prefix}.fc{i}.w"] = fc.w
            named[f"{prefix}.fc{i}.b"] = fc.b
        return named


class CouplingLayer:
    """One affine coupling step: half the dims condition a scale/shift of the
    rest.  Scale output is tanh-bounded by a learnable gain; final layers
    start at zero so the whole stack begins as the identity map."""

    def __init__(self, pivot: int, side: str, cond_dim: int, hidden: int,
                 rng: np.random.Generator):
        if side not in ("left", "right"):
            raise ValueError(f"bad side {side!r}")
        self.pivot = pivot
        self.side = side
        self.keep_dim = pivot if side == "right" else ACT_DIM - pivot
        self.trans_dim = ACT_DIM - self.keep_dim
        n_in = self.keep_dim + cond_dim
        self.s1 = DenseLayer(n_in, hidden, activation="relu", rng=rng)
        self.s2 = DenseLayer(hidden, self.trans_dim, zero_init=True)
        self.t1 = DenseLayer(n_in, hidden, activation="relu", rng=rng)
        self.t2 = DenseLayer(hidden, self.trans_dim, zero_init=True)
        self.s_bound = Parameter(np.array(2.0))

    def _split(self, u):
        if self.side == "right":
            return u[:, :self.pivot], u[:, self.pivot:]
        return u[:, self.pivot:], u[:, :self.pivot]

    def _join(self, keep, trans):
        if self.side == "right":
            return np.concatenate([keep, trans], axis=1)
        return np.concatenate([trans, keep], axis=1)

    def _nets(self, keep: np.ndarray, cond: np.ndarray):
        h = np.concatenate([keep, cond], axis=1)
        s = np.tanh(self.s2.forward(self.s1.forward(h))) * self.s_bound.value
        t = self.t2.forward(self.t1.forward(h))
        return s, t

    def forward_np(self, z: np.ndarray, cond: np.ndarray):
        keep, trans = self._split(z)
        s, t = self._nets(keep, cond)
        return self._join(keep, trans * np.exp(s) + t), s.sum(axis=1)

    def inverse_np(self, x: np.ndarray, cond: np.ndarray):
        keep, trans = self._split(x)
        s, t = self._nets(keep, cond)
        return self._join(keep, (trans - t) * np.exp(-s)), -s.sum(axis=1)

    def inverse_var(self, x: Var, cond: Var):
        """Tape version of the inverse pass; returns (z, per-row -sum s)."""
        if self.side == "right":
            keep = slice_cols(x, 0, self.pivot)
            trans = slice_cols(x, self.pivot, ACT_DIM)
        else:
            keep = slice_cols(x, self.pivot, ACT_DIM)
            trans = slice_cols(x, 0, self.pivot)
        h = concat([keep, cond], axis=1)
        s = mul(tanh(self.s2.forward_var(self.s1.forward_var(h))), self.s_bound)
        t = self.t2.forward_var(self.t1.forward_var(h))
        z_trans = mul(sub(trans, t), exp(neg(s)))
        if self.side == "right":
            z = concat([keep, z_trans], axis=1)
        else:
            z = concat([z_trans, keep], axis=1)
        return z, neg(vsum(s, axis=1))

    def parameters(self) -> list[Parameter]:
        out = [self.s_bound]
        for layer in (self.s1, self.s2, self.t1, self.t2):
            out.extend(layer.parameters())
        return out

    def named_parameters(self, prefix: str) -> dict[str, Parameter]:
        return {
            f"{prefix}.s.w0": self.s1.w, f"{prefix}.s.b0": self.s1.b,
            f"{prefix}.s.w1": self.s2.w, f"{prefix}.s.b1": self.s2.b,
            f"{prefix}.s.bound": self.s_bound,
            f"{prefix}.t.w0": self.t1.w, f"{prefix}.t.b0": self.t1.b,
            f"{prefix}.t.w1": self.t2.w, f"{prefix}.t.b1": self.t2.b,
        }


class FlowModel:
    """Encoder plus coupling stack; exact densities, one-pass sampling."""

    def __init__(self, seed: int = 0, n_layers: int = FLOW_LAYERS,
                 hidden: int = FLOW_HIDDEN, embed_dim: int = EMBED_DIM):
        rng = np.random.default_rng(seed)
        self.n_layers = n_layers
        self.hidden = hidden
        self.embed_dim = embed_dim
        self.encoder = StateEncoder(rng, embed_dim)
        self.layers = [
            CouplingLayer(*_MASK_CYCLE[i % 4], embed_dim, hidden, rng)
            for i in range(n_layers)
        ]
        self.action_mean = np.zeros(ACT_DIM)
        self.action_std = np.ones(ACT_DIM)

    # ------------------------------------------------------------- plumbing

    def set_normalization(self, mean, std) -> None:
        self.action_mean = np.asarray(mean, dtype=np.float64).reshape(ACT_DIM)
        self.action_std = np.asarray(std, dtype=np.float64).reshape(ACT_DIM)
        if np.any(self.action_std <= 0.0):
            raise ValueError("action std must be positive")

    def encode(self, obs: np.ndarray) -> np.ndarray:
        return self.encoder.forward(obs)

    def flow_forward(self, z: np.ndarray, cond: np.ndarray):
        x = np.atleast_2d(np.asarray(z, dtype=np.float64))
        logdet = np.zeros(x.shape[0])
        for layer in self.layers:
            x, ld = layer.forward_np(x, cond)
            logdet += ld
        return x, logdet

    def flow_inverse(self, x: np.ndarray, cond: np.ndarray):
        z = np.atleast_2d(np.asarray(x, dtype=np.float64))
        logdet = np.zeros(z.shape[0])
        for layer in reversed(self.layers):
            z, ld = layer.inverse_np(z, cond)
            logdet += ld
        return z, logdet

    # ------------------------------------------------------------ densities

    def log_prob(self, actions: np.ndarray, obs: np.ndarray) -> np.ndarray:
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        cond = self.encode(obs)
        if cond.shape[0] == 1 and actions.shape[0] > 1:
            cond = np.broadcast_to(cond, (actions.shape[0], cond.shape[1]))
        u = (actions - self.action_mean) / self.action_std
        z, logdet = self.flow_inverse(u, cond)
        base = -0.5 * np.sum(z * z, axis=1) - 0.5 * ACT_DIM * LOG_2PI
        return base + logdet - np.sum(np.log(self.action_std))

    def log_prob_var(self, actions: np.ndarray, cond: Var) -> Var:
        """Per-row log density on the tape; actions are constants."""
        u = (np.atleast_2d(actions) - self.action_mean) / self.action_std
        z = Var(u, requires_grad=False)
        logdet = None
        for layer in reversed(self.layers):
            z, ld = layer.inverse_var(z, cond)
            logdet = ld if logdet is None else logdet + ld
        base_const = -0.5 * ACT_DIM * LOG_2PI - float(np.sum(np.log(self.action_std)))
        base = mul(vsum(square(z), axis=1), Var(np.array(-0.5), requires_grad=False))
        return base + logdet + Var(np.array(base_const), requires_grad=False)

    # ------------------------------------------------------------- sampling

    def sample(self, obs: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """n draws for one observation: one encoder pass, one flow pass."""
        if n < 1:
            raise ValueError("n must be >= 1")
        cond = self.encode(obs)
        if cond.shape[0] != 1:
            raise ValueError("sample() takes a single observation; "
                             "use sample_rows for batches")
        cond = np.broadcast_to(cond, (n, cond.shape[1]))
        z = rng.standard_normal((n, ACT_DIM))
        x, _ = self.flow_forward(z, cond)
        return x * self.action_std + self.action_mean

    def sample_rows(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One draw per observation row; used in the refiner loop."""
        cond = self.encode(obs)
        z = rng.standard_normal((cond.shape[0], ACT_DIM))
        x, _ = self.flow_forward(z, cond)
        return x * self.action_std + self.action_mean

    # ----------------------------------------------------------- checkpoint

    def parameters(self) -> list[Parameter]:
        out = self.encoder.parameters()
        for layer in self.layers:
            out.extend(layer.parameters())
        return out

    def named_parameters(self) -> dict[str, Parameter]:
        named = self.encoder.named_parameters()
        for i, layer in enumerate(self.layers):
            named.update(layer.named_parameters(f"flow.layer{i}"))
        return named

    def n_params(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def save(self, path) -> None:
        sections = {k: p.value for k, p in self.named_parameters().items()}
        sections["meta.action_mean"] = self.action_mean
        sections["meta.action_std"] = self.action_std
        sections["meta.arch"] = np.array(
            [self.n_layers, self.hidden, self.embed_dim], dtype=np.float64)
        save_checkpoint(path, sections)

    @classmethod
    def load(cls, path) -> "FlowModel":
        sections = load_checkpoint(path)
        n_layers, hidden, embed = (int(v) for v in sections["meta.arch"])
        model = cls(seed=0, n_layers=n_layers, hidden=hidden, embed_dim=embed)
        for name, param in model.named_parameters().items():
            param.value = sections[name].reshape(param.value.shape)
        model.set_normalization(sections["meta.action_mean"],
                                sections["meta.action_std"])
        return model


class RegressorBaseline:
    """Same encoder, deterministic MSE head; width picked to land the total
    parameter count near a target (the flow it stands in for)."""

    def __init__(self, seed: int = 0, embed_dim: int = EMBED_DIM,
                 head_hidden: int | None = None,
                 match_params: int | None = None):
        rng = np.random.default_rng(seed)
        self.embed_dim = embed_dim
        self.encoder = StateEncoder(rng, embed_dim)
        if head_hidden is None:
            target = match_params if match_params is not None else 0
            head_hidden = self._solve_hidden(target) if target else 2 * embed_dim
        self.head_hidden = head_hidden
        self.head = [
            DenseLayer(embed_dim, head_hidden, activation="relu", rng=rng),
            DenseLayer(head_hidden, head_hidden, activation="relu", rng=rng),
            DenseLayer(head_hidden, ACT_DIM, rng=rng),
        ]

    def _solve_hidden(self, target: int) -> int:
        enc = sum(p.value.size for p in self.encoder.parameters())
        # head params: e*h + h + h*h + h + 3h + 3 as a function of width h
        best_h, best_gap = 8, np.inf
        h = 8
        while h < 8192:
            total = enc + (self.embed_dim * h + h) + (h * h + h) + (3 * h + 3)
            gap = abs(total - target)
            if gap < best_gap:
                best_h, best_gap = h, gap
            if total > target and gap > best_gap:
                break
            h += 8
        return best_h

    def predict(self, obs: np.ndarray) -> np.ndarray:
        h = self.encoder.forward(obs)
        for fc in self.head:
            h = fc.forward(h)
        return h[0] if np.asarray(obs).ndim == 1 else h

    def forward_var(self, obs: np.ndarray) -> Var:
        h = self.encoder.forward_var(obs)
        for fc in self.head:
            h = fc.forward_var(h)
        return h

    def parameters(self) -> list[Parameter]:
        out = self.encoder.parameters()
        for fc in self.head:
            out.extend(fc.parameters())
        return out

    def named_parameters(self) -> dict[str, Parameter]:
        named = self.encoder.named_parameters()
        for i, fc in enumerate(self.head):
            named[f"head.fc{i}.w"] = fc.w
            named[f"head.fc{i}.b"] = fc.b
        return named

    def n_params(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def save(self, path) -> None:
        sections = {k: p.value for k, p in self.named_parameters().items()}
        sections["meta.arch"] = np.array(
            [self.embed_dim, self.head_hidden], dtype=np.float64)
        save_checkpoint(path, sections)

    @classmethod
    def load(cls, path) -> "RegressorBaseline":
        sections = load_checkpoint(path)
        embed, hidden = (int(v) for v in sections["meta.arch"])
        model = cls(seed=0, embed_dim=embed, head_hidden=hidden)
        for name, param in model.named_parameters().items():
            param.value = sections[name].reshape(param.value.shape)
        return model
