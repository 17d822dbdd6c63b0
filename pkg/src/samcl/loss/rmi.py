"""Distance functions for the triplet terms: region mutual information and soft cross-entropy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..errors import ContractViolation, SingularityError
from ..tensor import Tensor


@dataclass
class LossConfig:
    margin: float = 1.0
    rmi_radius: int = 3  # neighborhood side; R = rmi_radius ** 2
    rmi_downsample: int = 2
    rmi_epsilon: float = 5e-4
    lambda_ce: float = 0.5
    lambda_mi: float = 0.5

    def __post_init__(self):
        if self.margin < 0:
            raise ContractViolation(f"margin must be >= 0, got {self.margin}")
        if self.rmi_epsilon <= 0:
            raise ContractViolation(f"rmi_epsilon must be > 0, got {self.rmi_epsilon}")
        if self.rmi_radius < 1 or self.rmi_downsample < 1:
            raise ContractViolation("rmi_radius and rmi_downsample must be >= 1")
        if abs(self.lambda_ce + self.lambda_mi - 1.0) > 1e-12:
            raise ContractViolation(f"lambda_ce + lambda_mi must equal 1, got {self.lambda_ce + self.lambda_mi}")


def _target_array(target) -> np.ndarray:
    if isinstance(target, Tensor):
        return target.data
    if hasattr(target, "tensor"):  # SwappedMask
        return np.asarray(target.tensor, dtype=np.float64)
    return np.asarray(target, dtype=np.float64)


def pixel_cross_entropy(logits: Tensor, target: np.ndarray) -> Tensor:
    """Mean over pixels of ``-sum_c t_c log softmax(logits)_c``."""
    logp = T.log_softmax_channels(logits)
    return T.neg(T.mean(T.sum(T.mul(logp, Tensor(target)), axis=1)))


def _center(x: Tensor) -> Tensor:
    m = T.mean(x, axis=-1, keepdims=True)
    return T.sub(x, T.broadcast_to(m, x.shape))


def mi_term(probs: Tensor, target: np.ndarray, cfg: LossConfig) -> Tensor:
    """Region-MI part: ``1/(2 R C) * sum_c log det(Sigma_{Y|P} + eps I)``, averaged over the batch.

    Covariances are sample covariances over all ``side x side`` windows of
    the downsampled maps (P average-pooled, Y nearest-sampled).
    """
    n, c, h, w = probs.shape
    f = cfg.rmi_downsample
    side = cfg.rmi_radius
    r = side * side
    if f > 1:
        probs = T.avg_pool2d(probs, f)
        target = np.ascontiguousarray(target[:, :, ::f, ::f])
    if probs.shape[2] < side or probs.shape[3] < side:
        raise ContractViolation(
            f"rmi: downsampled size {probs.shape[2]}x{probs.shape[3]} smaller than neighborhood side {side}"
        )
    p_vec = _center(T.unfold_patches(probs, side))  # [N, C, R, L]
    count = p_vec.shape[-1]
    y_vec = T.unfold_patches(Tensor(target), side).data
    y_vec = y_vec - y_vec.mean(axis=-1, keepdims=True)
    eye = np.broadcast_to(np.eye(r), (n, c, r, r))
    y_cov = Tensor(y_vec @ np.swapaxes(y_vec, -1, -2) / count)
    p_cov = T.mul(T.matmul(p_vec, T.swap_last(p_vec)), 1.0 / count)
    yp_cov = T.mul(T.matmul(Tensor(y_vec), T.swap_last(p_vec)), 1.0 / count)
    eps = cfg.rmi_epsilon
    try:
        p_inv = T.spd_inverse(T.add(p_cov, Tensor(eps * eye)))
        explained = T.matmul(T.matmul(yp_cov, p_inv), T.swap_last(yp_cov))
        conditional = T.sub(y_cov, explained)
        logdet = T.cholesky_logdet(T.add(conditional, Tensor(eps * eye)))  # [N, C]
    except SingularityError as exc:
        raise SingularityError(
            exc.pivot, f"rmi covariance not positive definite at pivot {exc.pivot}; increase rmi_epsilon (now {eps})"
        ) from exc
    return T.mul(T.sum(logdet), 1.0 / (2.0 * r * c * n))


def rmi_distance(logits: Tensor, target, cfg: LossConfig) -> Tensor:
    """``lambda_ce * CE + lambda_mi * MI_term`` between logits and a one-hot target."""
    logits = T.as_tensor(logits)
    y = _target_array(target)
    if logits.shape != y.shape:
        raise ContractViolation(f"rmi_distance: logits {logits.shape} vs target {y.shape}")
    ce = pixel_cross_entropy(logits, y)
    mi = mi_term(T.softmax_channels(logits), y, cfg)
    return T.add(T.mul(ce, cfg.lambda_ce), T.mul(mi, cfg.lambda_mi))


def ce_distance(anchor_feat: Tensor, ref_feat: Tensor) -> Tensor:
    """Soft cross-entropy ``-mean_pixels sum_c softmax(ref)_c log softmax(anchor)_c``.

    Not symmetric: the anchor supplies the log term, the reference the soft target.
    """
    anchor_feat, ref_feat = T.as_tensor(anchor_feat), T.as_tensor(ref_feat)
    if anchor_feat.shape != ref_feat.shape:
        raise ContractViolation(f"ce_distance: shape mismatch {anchor_feat.shape} vs {ref_feat.shape}")
    prod = T.mul(T.softmax_channels(ref_feat), T.log_softmax_channels(anchor_feat))
    return T.neg(T.mean(T.sum(prod, axis=1)))
