"""Multi-scale triplet loss with class-swapped negatives.

The anchor is the softmaxed prediction, the positive the one-hot ground truth
and the negative its class-swapped copy. Scale 0 compares them directly with
the RMI distance; scales 1-3 pass all three through the shared auxiliary
network and compare each tap with a soft cross-entropy.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .. import tensor as T
from ..errors import ContractViolation
from ..tensor import Tensor
from .auxnet import AuxNet, aux_forward
from .onehot import SwappedMask
from .rmi import LossConfig, ce_distance, rmi_distance


def hinge(d_pos, d_neg, margin: float) -> Tensor:
    """``max(d_pos - d_neg + margin, 0)``."""
    if margin < 0:
        raise ContractViolation(f"margin must be >= 0, got {margin}")
    d_pos, d_neg = T.as_tensor(d_pos), T.as_tensor(d_neg)
    return T.max_with_zero(T.add(T.sub(d_pos, d_neg), margin))


def triplet_term(d: Callable[[Tensor, Tensor], Tensor], a, p, n, margin: float) -> Tensor:
    return hinge(d(a, p), d(a, n), margin)


def samcl_terms(logits: Tensor, y_pos, y_neg, net: AuxNet, cfg: LossConfig) -> list[Tensor]:
    """The four triplet terms [s0, s1, s2, s3]."""
    logits = T.as_tensor(logits)
    pos = np.asarray(y_pos.data if isinstance(y_pos, Tensor) else y_pos, dtype=np.float64)
    neg = y_neg.tensor if isinstance(y_neg, SwappedMask) else np.asarray(y_neg, dtype=np.float64)
    if not (logits.shape == pos.shape == neg.shape):
        raise ContractViolation(f"samcl_loss: logits {logits.shape}, positive {pos.shape}, negative {neg.shape}")
    terms = [hinge(rmi_distance(logits, pos, cfg), rmi_distance(logits, neg, cfg), cfg.margin)]
    anchor_maps = aux_forward(T.softmax_channels(logits), net)
    pos_maps = aux_forward(Tensor(pos), net)
    neg_maps = aux_forward(Tensor(neg), net)
    for fa, fp, fn in zip(anchor_maps, pos_maps, neg_maps):
        terms.append(hinge(ce_distance(fa, fp), ce_distance(fa, fn), cfg.margin))
    return terms


def samcl_loss(logits: Tensor, y_pos, y_neg, net: AuxNet, cfg: LossConfig) -> Tensor:
    s0, s1, s2, s3 = samcl_terms(logits, y_pos, y_neg, net, cfg)
    return T.add(T.add(s0, s1), T.add(s2, s3))
