"""Dense and circular-conv layers over the autodiff core.

Each layer owns persistent :class:`Parameter` leaves.  ``forward`` is the
cheap inference path on raw arrays; ``forward_var`` builds the tape for
training.  Both paths evaluate the same arithmetic.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    Parameter,
    Var,
    as_var,
    circular_gather_indices,
    conv1d_circular_op,
    dense_op,
    relu,
    sigmoid,
    tanh,
    _sigmoid,
)

ACTIVATIONS = ("identity", "tanh", "relu", "sigmoid")


def apply_activation(name: str, x: np.ndarray) -> np.ndarray:
    if name == "identity":
        return x
    if name == "tanh":
        return np.tanh(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "sigmoid":
        return _sigmoid(x)
    raise ValueError(f"unknown activation {name!r}")


def apply_activation_var(name: str, x: Var) -> Var:
    if name == "identity":
        return x
    if name == "tanh":
        return tanh(x)
    if name == "relu":
        return relu(x)
    if name == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {name!r}")


class DenseLayer:
    """Fully connected layer, weights (in, out), optional activation."""

    def __init__(self, n_in: int, n_out: int, activation: str = "identity",
                 rng: np.random.Generator | None = None, zero_init: bool = False):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        if zero_init:
            w = np.zeros((n_in, n_out))
        else:
            if rng is None:
                rng = np.random.default_rng(0)
            if activation == "relu":
                scale = np.sqrt(2.0 / n_in)
            else:
                scale = np.sqrt(1.0 / n_in)
            w = rng.normal(0.0, scale, size=(n_in, n_out))
        self.w = Parameter(w)
        self.b = Parameter(np.zeros(n_out))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return apply_activation(self.activation, x @ self.w.value + self.b.value)

    def forward_var(self, x: Var) -> Var:
        return apply_activation_var(self.activation, dense_op(x, self.w, self.b))

    def parameters(self) -> list[Parameter]:
        return [self.w, self.b]

    def n_params(self) -> int:
        return self.w.value.size + self.b.value.size


class Conv1dLayer:
    """Circular 1D convolution; output length is input length / stride (exact)."""

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int = 1,
                 activation: str = "identity", rng: np.random.Generator | None = None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if kernel % 2 != 1:
            raise ValueError("kernel width must be odd for centered circular conv")
        self.c_in = c_in
        self.c_out = c_out
        self.kernel = kernel
        self.stride = stride
        self.activation = activation
        if rng is None:
            rng = np.random.default_rng(0)
        fan_in = c_in * kernel
        scale = np.sqrt(2.0 / fan_in) if activation == "relu" else np.sqrt(1.0 / fan_in)
        self.kernels = Parameter(rng.normal(0.0, scale, size=(c_out, c_in, kernel)))
        self.bias = Parameter(np.zeros(c_out))
        self._idx_cache: dict[int, np.ndarray] = {}

    def _idx(self, length: int) -> np.ndarray:
        idx = self._idx_cache.get(length)
        if idx is None:
            idx = circular_gather_indices(length, self.kernel, self.stride)
            self._idx_cache[length] = idx
        return idx

    def forward(self, x: np.ndarray) -> np.ndarray:
        """x (B, C_in, L) -> (B, C_out, L // stride)."""
        idx = self._idx(x.shape[2])
        windows = x[:, :, idx]
        out = np.einsum("bilk,oik->bol", windows, self.kernels.value, optimize=True)
        out = out + self.bias.value[None, :, None]
        return apply_activation(self.activation, out)

    def forward_var(self, x: Var) -> Var:
        idx = self._idx(x.value.shape[2])
        out = conv1d_circular_op(x, self.kernels, self.bias, idx)
        return apply_activation_var(self.activation, out)

    def parameters(self) -> list[Parameter]:
        return [self.kernels, self.bias]

    def n_params(self) -> int:
        return self.kernels.value.size + self.bias.value.size


class MLP:
    """Stack of DenseLayers; hidden layers share one activation."""

    def __init__(self, dims: list[int], hidden_activation: str = "tanh",
                 out_activation: str = "identity", rng: np.random.Generator | None = None,
                 zero_init_last: bool = False):
        if rng is None:
            rng = np.random.default_rng(0)
        self.layers: list[DenseLayer] = []
        for i in range(len(dims) - 1):
            last = i == len(dims) - 2
            act = out_activation if last else hidden_activation
            self.layers.append(
                DenseLayer(dims[i], dims[i + 1], act, rng=rng,
                           zero_init=zero_init_last and last)
            )

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward_var(self, x: Var) -> Var:
        for layer in self.layers:
            x = layer.forward_var(x)
        return x

    def parameters(self) -> list[Parameter]:
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        return out

    def n_params(self) -> int:
        return sum(layer.n_params() for layer in self.layers)


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    """Functional dense-layer forward on a batch or a single vector."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    out = layer.forward(x)
    return out[0] if single else out


def conv1d_forward(layer: Conv1dLayer, x: np.ndarray) -> np.ndarray:
    """Functional conv forward; accepts (L,), (C,L) or (B,C,L)."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = 0
    if x.ndim == 1:
        x = x[None, None, :]
        squeeze = 2
    elif x.ndim == 2:
        x = x[None, :, :]
        squeeze = 1
    out = layer.forward(x)
    if squeeze == 2:
        return out[0, 0] if out.shape[1] == 1 else out[0]
    if squeeze == 1:
        return out[0]
    return out


def backward(loss: Var, seed: np.ndarray | None = None) -> None:
    """Run reverse-mode accumulation from ``loss`` into leaf parameters."""
    loss.backward(seed)


def global_grad_norm(params: list[Parameter]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))


def clip_grad_norm(params: list[Parameter], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    norm = global_grad_norm(params)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm
