"""Finite-difference verification of analytic gradients.

Each check perturbs a random subset of input entries with central differences
(h = 1e-5, float64) and compares against the reverse-mode gradient using
``||analytic - numeric|| / max(||analytic||, ||numeric||)`` over that subset.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import segnet
from . import tensor as T
from .loss import LossConfig, build_auxnet, ce_distance, class_swap, one_hot, rmi_distance, samcl_loss
from .tensor import Tensor
from .training.losses import dice_loss, weighted_bce_loss

STEP = 1e-5
THRESHOLD = 1e-4


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    rng: np.random.Generator,
    max_coords: int = 48,
    h: float = STEP,
) -> float:
    """Max relative error over ``inputs`` of d fn() / d input."""
    for t in inputs:
        t.grad = None
        t.requires_grad = True
    fn().backward()
    worst = 0.0
    for t in inputs:
        analytic = t.grad.ravel()
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        numeric = np.empty(len(coords))
        with T.no_grad():
            for k, i in enumerate(coords):
                orig = flat[i]
                flat[i] = orig + h
                up = fn().item()
                flat[i] = orig - h
                down = fn().item()
                flat[i] = orig
                numeric[k] = (up - down) / (2 * h)
        worst = max(worst, relative_error(analytic[coords], numeric))
    return worst


@dataclass
class GradcheckResult:
    op: str
    max_rel_error: float

    @property
    def ok(self) -> bool:
        return self.max_rel_error < THRESHOLD


def _logits(rng, n, c, h, w, scale=2.0) -> Tensor:
    return Tensor(rng.normal(0.0, scale, size=(n, c, h, w)))


def _onehot(rng, n, c, h, w) -> np.ndarray:
    return one_hot(_blob_mask(rng, n, c, h, w), c)


def _blob_mask(rng, n, c, h, w) -> np.ndarray:
    """Spatially coherent random labels (upsampled coarse grid) with every class present."""
    coarse = rng.integers(0, c, size=(n, max(h // 4, 1), max(w // 4, 1)))
    mask = np.repeat(np.repeat(coarse, 4, axis=1), 4, axis=2)[:, :h, :w]
    for i in range(n):
        for cls in range(c):
            mask[i, cls % h, (cls * 3) % w] = cls
    return mask


def tensor_suite(rng: np.random.Generator) -> dict[str, Callable[[], float]]:
    def conv():
        x = Tensor(rng.normal(size=(1, 2, 6, 6)))
        w = Tensor(rng.normal(size=(3, 2, 3, 3)))
        b = Tensor(rng.normal(size=3))
        return check_gradients(lambda: T.sum(T.conv2d(x, w, b, 1, 1)) + T.mean(T.mul(T.conv2d(x, w, b, 1, 1), T.conv2d(x, w, b, 1, 1))), [x, w, b], rng)

    def conv_strided():
        x = Tensor(rng.normal(size=(2, 3, 8, 8)))
        w = Tensor(rng.normal(size=(3, 3, 3, 3)))
        b = Tensor(rng.normal(size=3))
        y_ref = rng.normal(size=(2, 3, 4, 4))
        return check_gradients(lambda: T.sum(T.mul(T.conv2d(x, w, b, 2, 1), Tensor(y_ref))), [x, w, b], rng)

    def softmax():
        x = _logits(rng, 2, 4, 3, 3)
        ref = rng.normal(size=x.shape)
        return check_gradients(lambda: T.sum(T.mul(T.softmax_channels(x), Tensor(ref))), [x], rng)

    def log_softmax():
        x = _logits(rng, 2, 4, 3, 3)
        ref = rng.normal(size=x.shape)
        return check_gradients(lambda: T.sum(T.mul(T.log_softmax_channels(x), Tensor(ref))), [x], rng)

    def relu_composite():
        a, b, c = (Tensor(rng.normal(size=(4, 5))) for _ in range(3))
        return check_gradients(lambda: T.sum(T.relu(T.add(T.mul(a, b), c))), [a, b, c], rng)

    def pooling():
        x = Tensor(rng.normal(size=(2, 2, 4, 4)))
        ref = rng.normal(size=(2, 2, 4, 4))
        return check_gradients(
            lambda: T.sum(T.mul(T.upsample_nearest2d(T.add(T.max_pool2d(x), T.avg_pool2d(x))), Tensor(ref))),
            [x], rng,
        )

    def unfold():
        x = Tensor(rng.normal(size=(1, 2, 5, 5)))
        ref = rng.normal(size=(1, 2, 9, 9))
        return check_gradients(lambda: T.sum(T.mul(T.unfold_patches(x, 3), Tensor(ref))), [x], rng)

    def logdet():
        a = rng.normal(size=(5, 5))
        m = Tensor(a @ a.T + np.eye(5))
        return check_gradients(lambda: T.cholesky_logdet(m), [m], rng)

    def inverse():
        a = rng.normal(size=(2, 4, 4))
        m = Tensor(a @ np.swapaxes(a, -1, -2) + np.eye(4))
        ref = rng.normal(size=(2, 4, 4))
        return check_gradients(lambda: T.sum(T.mul(T.spd_inverse(m), Tensor(ref))), [m], rng)

    def elementwise():
        a = Tensor(rng.uniform(0.5, 2.0, size=(3, 4)))
        b = Tensor(rng.uniform(0.5, 2.0, size=(3, 4)))
        return check_gradients(
            lambda: T.mean(T.add(T.div(T.log(a), b), T.mul(T.exp(T.neg(a)), T.sigmoid(b)))) + T.sum(T.softplus(T.sub(a, b))),
            [a, b], rng,
        )

    return {
        "conv2d": conv,
        "conv2d_stride2": conv_strided,
        "softmax_channels": softmax,
        "log_softmax_channels": log_softmax,
        "relu(a*b+c)": relu_composite,
        "pool/upsample": pooling,
        "unfold_patches": unfold,
        "cholesky_logdet": logdet,
        "spd_inverse": inverse,
        "elementwise": elementwise,
    }


def loss_suite(rng: np.random.Generator) -> dict[str, Callable[[], float]]:
    cfg = LossConfig()

    def bce():
        x = _logits(rng, 2, 3, 4, 4)
        t = _onehot(rng, 2, 3, 4, 4)
        w = rng.uniform(0.5, 2.0, size=3)
        return check_gradients(lambda: weighted_bce_loss(x, t, w), [x], rng)

    def dice():
        x = _logits(rng, 2, 3, 4, 4)
        t = _onehot(rng, 2, 3, 4, 4)
        return check_gradients(lambda: dice_loss(x, t), [x], rng)

    def rmi():
        x = _logits(rng, 2, 1, 8, 8, scale=1.0)
        x = Tensor(np.concatenate([x.data, -x.data], axis=1))
        t = _onehot(rng, 2, 2, 8, 8)
        return check_gradients(lambda: rmi_distance(x, t, cfg), [x], rng)

    def rmi_c4():
        x = _logits(rng, 1, 4, 16, 16, scale=1.0)
        t = _onehot(rng, 1, 4, 16, 16)
        return check_gradients(lambda: rmi_distance(x, t, cfg), [x], rng)

    def ce():
        a = _logits(rng, 2, 3, 4, 4)
        r = _logits(rng, 2, 3, 4, 4)
        return check_gradients(lambda: ce_distance(a, r), [a, r], rng)

    def samcl():
        c = 3
        x = _logits(rng, 1, c, 16, 16, scale=1.0)
        y = _onehot(rng, 1, c, 16, 16)
        neg = class_swap(y, rng)
        net = build_auxnet(c, rng)
        return check_gradients(lambda: samcl_loss(x, y, neg, net, cfg), [x, *net.parameters()], rng)

    return {
        "weighted_bce_loss": bce,
        "dice_loss": dice,
        "rmi_distance": rmi,
        "rmi_distance[C=4,16x16]": rmi_c4,
        "ce_distance": ce,
        "samcl_loss": samcl,
    }


def net_suite(rng: np.random.Generator) -> dict[str, Callable[[], float]]:
    def forward():
        cfg = segnet.UNetConfig(depth=2, base_channels=4, num_classes=3)
        params = segnet.build(cfg, rng)
        x = Tensor(rng.normal(size=(1, 1, 16, 16)))
        names = ["enc0.conv1.weight", "mid.conv2.weight", "dec0.conv1.weight", "head.weight", "head.bias"]
        ref = rng.normal(size=(1, 3, 16, 16))
        return check_gradients(
            lambda: T.mean(T.mul(segnet.forward(params, x), Tensor(ref))),
            [params.tensors[n] for n in names], rng, max_coords=16,
        )

    return {"segnet.forward": forward}


SUITES = {"tensor": tensor_suite, "loss": loss_suite, "net": net_suite}


def run(modules: Sequence[str] = ("tensor", "loss", "net"), seed: int = 0) -> list[GradcheckResult]:
    results = []
    for name in modules:
        rng = np.random.default_rng([seed, list(SUITES).index(name)])
        for op, check in SUITES[name](rng).items():
            results.append(GradcheckResult(op, check()))
    return results
