"""NLL training for the flow expert and MSE training for its baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..nn import Adam, Var, square, vmean, vsum
from .model import ACT_DIM, EMBED_DIM, FLOW_HIDDEN, FLOW_LAYERS, FlowModel, RegressorBaseline

log = logging.getLogger(__name__)

STD_FLOOR = 1e-3


@dataclass
class ExpertTrainConfig:
    lr: float = 5e-4
    batch_size: int = 256
    epochs: int = 20
    seed: int = 0
    n_layers: int = FLOW_LAYERS
    hidden: int = FLOW_HIDDEN
    embed_dim: int = EMBED_DIM


def action_stats(actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = actions.mean(axis=0)
    std = actions.std(axis=0)
    # constant axes (v_y in unicycle data) would otherwise divide by ~0
    return mean, np.maximum(std, STD_FLOOR)


def _check_finite(loss_value: float, what: str, epoch: int, batch: int) -> None:
    if not np.isfinite(loss_value):
        raise RuntimeError(
            f"{what} loss became non-finite ({loss_value}) at "
            f"epoch {epoch}, batch {batch}; aborting")


def train_expert(obs: np.ndarray, actions: np.ndarray,
                 cfg: ExpertTrainConfig | None = None):
    """Fit the flow by maximum likelihood; returns (model, per-epoch NLL)."""
    cfg = cfg or ExpertTrainConfig()
    obs = np.asarray(obs, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    if obs.shape[0] == 0:
        raise ValueError("empty dataset")
    if obs.shape[0] != actions.shape[0] or actions.shape[1] != ACT_DIM:
        raise ValueError(f"mismatched dataset shapes {obs.shape} / {actions.shape}")

    model = FlowModel(seed=cfg.seed, n_layers=cfg.n_layers, hidden=cfg.hidden,
                      embed_dim=cfg.embed_dim)
    model.set_normalization(*action_stats(actions))
    opt = Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)

    n = obs.shape[0]
    history = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        total, seen = 0.0, 0
        for bi, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[lo:lo + cfg.batch_size]
            cond = model.encoder.forward_var(obs[idx])
            nll = -vmean(model.log_prob_var(actions[idx], cond))
            _check_finite(float(nll.value), "NLL", epoch, bi)
            opt.zero_grad()
            nll.backward()
            opt.step()
            total += float(nll.value) * idx.size
            seen += idx.size
        history.append(total / seen)
        log.info("expert epoch %d/%d  nll %.4f", epoch + 1, cfg.epochs, history[-1])
    return model, history


@dataclass
class RegressorTrainConfig:
    lr: float = 5e-4
    batch_size: int = 256
    epochs: int = 20
    seed: int = 0
    embed_dim: int = EMBED_DIM
    match_params: int | None = None
    head_hidden: int | None = None


def train_regressor(obs: np.ndarray, actions: np.ndarray,
                    cfg: RegressorTrainConfig | None = None):
    """Fit the deterministic baseline by mean squared error."""
    cfg = cfg or RegressorTrainConfig()
    obs = np.asarray(obs, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    if obs.shape[0] == 0:
        raise ValueError("empty dataset")

    model = RegressorBaseline(seed=cfg.seed, embed_dim=cfg.embed_dim,
                              head_hidden=cfg.head_hidden,
                              match_params=cfg.match_params)
    opt = Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)

    n = obs.shape[0]
    history = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        total, seen = 0.0, 0
        for bi, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[lo:lo + cfg.batch_size]
            pred = model.forward_var(obs[idx])
            err = pred - Var(actions[idx], requires_grad=False)
            loss = vmean(vsum(square(err), axis=1))
            _check_finite(float(loss.value), "MSE", epoch, bi)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.value) * idx.size
            seen += idx.size
        history.append(total / seen)
        log.info("regressor epoch %d/%d  mse %.5f", epoch + 1, cfg.epochs,
                 history[-1])
    return model, history
