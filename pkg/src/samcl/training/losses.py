"""Baseline segmentation losses used in the ablation."""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..errors import ContractViolation
from ..tensor import Tensor


def weighted_bce_loss(logits: Tensor, target, class_weights=None) -> Tensor:
    """Mean over pixels and channels of ``w_c * BCE(sigmoid(logit), t)``.

    Evaluated in log-sigmoid form, ``t*softplus(-x) + (1-t)*softplus(x)``, so
    saturated logits never produce log(0).
    """
    logits = T.as_tensor(logits)
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if logits.shape != t.shape:
        raise ContractViolation(f"weighted_bce_loss: logits {logits.shape} vs target {t.shape}")
    c = logits.shape[1]
    if class_weights is None:
        class_weights = np.ones(c)
    w = np.asarray(class_weights, dtype=np.float64)
    if w.shape != (c,):
        raise ContractViolation(f"weighted_bce_loss: expected {c} class weights, got shape {w.shape}")
    if np.any(w <= 0):
        raise ContractViolation(f"weighted_bce_loss: class weights must be positive, got {w.tolist()}")
    per = T.add(T.mul(T.softplus(T.neg(logits)), Tensor(t)), T.mul(T.softplus(logits), Tensor(1.0 - t)))
    wmap = np.broadcast_to(w[None, :, None, None], logits.shape)
    return T.mean(T.mul(per, Tensor(wmap)))


def inverse_frequency_weights(target: np.ndarray, floor: float = 1e-3) -> np.ndarray:
    """Class weights proportional to 1 / pixel frequency, normalized to mean 1."""
    freq = np.asarray(target).mean(axis=(0, 2, 3))
    w = 1.0 / np.maximum(freq, floor)
    return w / w.mean()


def dice_loss(logits: Tensor, target, eps: float = 1e-6) -> Tensor:
    """``1 - mean_c 2 sum(p t) / (sum p + sum t + eps)`` with p = softmax(logits)."""
    logits = T.as_tensor(logits)
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if logits.shape != t.shape:
        raise ContractViolation(f"dice_loss: logits {logits.shape} vs target {t.shape}")
    p = T.softmax_channels(logits)
    axes = (0, 2, 3)
    inter = T.sum(T.mul(p, Tensor(t)), axis=axes)
    denom = T.add(T.sum(p, axis=axes), Tensor(t.sum(axis=axes) + eps))
    dice = T.div(T.mul(inter, 2.0), denom)
    return 1.0 - T.mean(dice)
