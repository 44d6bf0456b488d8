"""Reverse-mode autodiff over float64 numpy arrays.

A ``Var`` wraps an ndarray and remembers how it was produced.  Operations
build a fresh graph on every forward pass; calling :meth:`Var.backward` on a
scalar loss walks the recorded tape once in reverse topological order and
accumulates gradients into the leaf ``Parameter`` nodes.

The op vocabulary is deliberately small: dense affine maps, circular 1D
convolution, elementwise functions, reductions, concatenation and slicing.
Everything runs in 64-bit floats; no op ever downcasts.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Var",
    "Parameter",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "exp",
    "log",
    "tanh",
    "sigmoid",
    "relu",
    "softplus",
    "square",
    "sqrt",
    "matmul",
    "dense_op",
    "conv1d_circular_op",
    "circular_gather_indices",
    "vsum",
    "vmean",
    "concat",
    "slice_cols",
    "reshape",
    "minimum",
    "maximum",
    "clip",
    "detach",
    "as_var",
]


class Var:
    """Node in the autodiff tape."""

    __slots__ = ("value", "grad", "_parents", "_vjp", "requires_grad")

    def __init__(self, value, parents=(), vjp=None, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._vjp = vjp
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.value.shape

    def backward(self, seed=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``.grad``."""
        if seed is None:
            seed = np.ones_like(self.value)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))

        grads = {id(self): np.asarray(seed, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is None:
                if node.grad is None:
                    node.grad = g.copy()
                else:
                    node.grad = node.grad + g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if not parent.requires_grad or pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # Operator sugar keeps loss code readable.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)


class Parameter(Var):
    """Leaf Var that collects gradients across backward passes."""

    def __init__(self, value):
        super().__init__(np.array(value, dtype=np.float64), requires_grad=True)

    def zero_grad(self):
        self.grad = None


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x, dtype=np.float64))


def detach(x: Var) -> Var:
    return Var(x.value)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce gradient ``g`` back to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = a.value + b.value
    return Var(
        out,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)),
    )


def sub(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape)),
    )


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(
        a.value * b.value,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        ),
    )


def div(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = a.value / b.value
    return Var(
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.value, a.value.shape),
            _unbroadcast(-g * out / b.value, b.value.shape),
        ),
    )


def neg(a) -> Var:
    a = as_var(a)
    return Var(-a.value, (a,), lambda g: (-g,))


def exp(a) -> Var:
    a = as_var(a)
    out = np.exp(a.value)
    return Var(out, (a,), lambda g: (g * out,))


def log(a) -> Var:
    a = as_var(a)
    return Var(np.log(a.value), (a,), lambda g: (g / a.value,))


def sqrt(a) -> Var:
    a = as_var(a)
    out = np.sqrt(a.value)
    return Var(out, (a,), lambda g: (g * 0.5 / out,))


def tanh(a) -> Var:
    a = as_var(a)
    out = np.tanh(a.value)
    return Var(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a) -> Var:
    a = as_var(a)
    out = _sigmoid(a.value)
    return Var(out, (a,), lambda g: (g * out * (1.0 - out),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Evaluate through exp of the negative magnitude so neither branch overflows.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def relu(a) -> Var:
    a = as_var(a)
    mask = a.value > 0
    return Var(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def softplus(a) -> Var:
    """log(1 + exp(x)), evaluated as max(x,0) + log1p(exp(-|x|))."""
    a = as_var(a)
    x = a.value
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    s = _sigmoid(x)
    return Var(out, (a,), lambda g: (g * s,))


def square(a) -> Var:
    a = as_var(a)
    return Var(a.value * a.value, (a,), lambda g: (g * 2.0 * a.value,))


def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(
        a.value @ b.value,
        (a, b),
        lambda g: (g @ b.value.T, a.value.T @ g),
    )


def dense_op(x, w, b) -> Var:
    """Affine map ``x @ w + b`` with x (B,I), w (I,O), b (O,)."""
    x, w, b = as_var(x), as_var(w), as_var(b)
    return Var(
        x.value @ w.value + b.value,
        (x, w, b),
        lambda g: (g @ w.value.T, x.value.T @ g, g.sum(axis=0)),
    )


def circular_gather_indices(length: int, kernel: int, stride: int) -> np.ndarray:
    """Index table (L_out, K): position k of output j reads input (j*s + k - K//2) mod L."""
    if length % stride != 0:
        raise ValueError(f"input length {length} not divisible by stride {stride}")
    j = np.arange(length // stride)[:, None]
    k = np.arange(kernel)[None, :]
    return (j * stride + k - kernel // 2) % length


def conv1d_circular_op(x, kernels, bias, idx) -> Var:
    """Circular 1D convolution.

    x (B, C_in, L), kernels (C_out, C_in, K), bias (C_out,), idx from
    :func:`circular_gather_indices`.  Output (B, C_out, L // stride).
    """
    x, kernels, bias = as_var(x), as_var(kernels), as_var(bias)
    windows = x.value[:, :, idx]  # (B, C_in, L_out, K)
    out = np.einsum("bilk,oik->bol", windows, kernels.value, optimize=True)
    out = out + bias.value[None, :, None]

    def vjp(g):
        gw = np.einsum("bol,bilk->oik", g, windows, optimize=True)
        gb = g.sum(axis=(0, 2))
        contrib = np.einsum("bol,oik->bilk", g, kernels.value, optimize=True)
        bsz, cin, L = x.value.shape
        # scatter into a fresh C-order buffer: reshaping a non-contiguous
        # zeros_like would hand np.add.at a throwaway copy
        flat = np.zeros((bsz * cin, L))
        np.add.at(
            flat,
            (slice(None), idx.ravel()),
            np.ascontiguousarray(contrib).reshape(bsz * cin, -1),
        )
        return flat.reshape(x.value.shape), gw, gb

    return Var(out, (x, kernels, bias), vjp)


def vsum(a, axis=None, keepdims=False) -> Var:
    a = as_var(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.value.shape).copy(),)
        gg = g
        if not keepdims:
            gg = np.expand_dims(gg, axis)
        return (np.broadcast_to(gg, a.value.shape).copy(),)

    return Var(out, (a,), vjp)


def vmean(a, axis=None, keepdims=False) -> Var:
    a = as_var(a)
    out = a.value.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        n = a.value.size
    else:
        n = a.value.shape[axis]

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / n, a.value.shape).copy(),)
        gg = g
        if not keepdims:
            gg = np.expand_dims(gg, axis)
        return (np.broadcast_to(gg / n, a.value.shape).copy(),)

    return Var(out, (a,), vjp)


def concat(parts, axis=1) -> Var:
    parts = [as_var(p) for p in parts]
    out = np.concatenate([p.value for p in parts], axis=axis)
    sizes = [p.value.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Var(out, tuple(parts), vjp)


def slice_cols(a, start: int, stop: int) -> Var:
    a = as_var(a)
    out = a.value[:, start:stop]

    def vjp(g):
        gx = np.zeros_like(a.value)
        gx[:, start:stop] = g
        return (gx,)

    return Var(out, (a,), vjp)


def reshape(a, shape) -> Var:
    a = as_var(a)
    orig = a.value.shape
    return Var(a.value.reshape(shape), (a,), lambda g: (g.reshape(orig),))


def minimum(a, b) -> Var:
    """Elementwise min; gradient routes to the smaller argument (ties to a)."""
    a, b = as_var(a), as_var(b)
    mask = a.value <= b.value
    return Var(
        np.where(mask, a.value, b.value),
        (a, b),
        lambda g: (
            _unbroadcast(g * mask, a.value.shape),
            _unbroadcast(g * ~mask, b.value.shape),
        ),
    )


def maximum(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    mask = a.value >= b.value
    return Var(
        np.where(mask, a.value, b.value),
        (a, b),
        lambda g: (
            _unbroadcast(g * mask, a.value.shape),
            _unbroadcast(g * ~mask, b.value.shape),
        ),
    )


def clip(a, lo: float, hi: float) -> Var:
    """Clamp to [lo, hi]; gradient is zero outside the interval."""
    a = as_var(a)
    inside = (a.value >= lo) & (a.value <= hi)
    return Var(
        np.clip(a.value, lo, hi),
        (a,),
        lambda g: (g * inside,),
    )
