from .tensor import (
    Parameter,
    Var,
    as_var,
    clip,
    concat,
    detach,
    div,
    exp,
    log,
    minimum,
    maximum,
    mul,
    neg,
    reshape,
    sigmoid,
    slice_cols,
    softplus,
    square,
    sub,
    tanh,
    vmean,
    vsum,
)
from .layers import (
    Conv1dLayer,
    DenseLayer,
    MLP,
    backward,
    clip_grad_norm,
    conv1d_forward,
    dense_forward,
    global_grad_norm,
)
from .adam import Adam, AdamState, adam_update
from .checkpoint import (
    checkpoint_sha256,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "Parameter", "Var", "as_var", "clip", "concat", "detach", "div", "exp",
    "log", "minimum", "maximum", "mul", "neg", "reshape", "sigmoid",
    "slice_cols", "softplus", "square", "sub", "tanh", "vmean", "vsum",
    "Conv1dLayer", "DenseLayer", "MLP", "backward", "clip_grad_norm",
    "conv1d_forward", "dense_forward", "global_grad_norm", "Adam",
    "AdamState", "adam_update", "checkpoint_sha256", "load_checkpoint",
    "save_checkpoint",
]
