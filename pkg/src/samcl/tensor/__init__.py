"""Minimal float64 tensor engine with reverse-mode differentiation."""

from .core import Tensor, as_tensor, backward, grad_enabled, no_grad
from .linalg import cholesky, cholesky_logdet, spd_inverse
from .ops import (
    add,
    avg_pool2d,
    broadcast_to,
    clamp,
    concat,
    conv2d,
    div,
    exp,
    log,
    log_softmax_channels,
    matmul,
    max_pool2d,
    max_with_zero,
    mean,
    mul,
    neg,
    relu,
    reshape,
    sigmoid,
    softmax_channels,
    softplus,
    sub,
    swap_last,
    transpose,
    unfold_patches,
    upsample_nearest2d,
)
from .ops import sum  # noqa: A004
from .optim import AdamState, Optimizer, OptimizerConfig, optimizer_step

__all__ = [
    "Tensor", "as_tensor", "backward", "grad_enabled", "no_grad",
    "cholesky", "cholesky_logdet", "spd_inverse",
    "add", "avg_pool2d", "broadcast_to", "clamp", "concat", "conv2d", "div", "exp", "log",
    "log_softmax_channels", "matmul", "max_pool2d", "max_with_zero", "mean", "mul", "neg",
    "relu", "reshape", "sigmoid", "softmax_channels", "softplus", "sub", "sum", "swap_last",
    "transpose", "unfold_patches", "upsample_nearest2d",
    "AdamState", "Optimizer", "OptimizerConfig", "optimizer_step",
]
