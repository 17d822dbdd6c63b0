"""Inference and scoring.

This module is the deployment path: it needs only the segmentation network,
a checkpoint and the metrics. It deliberately has no dependency on the
augmentation package or the training-only auxiliary network.
"""

from __future__ import annotations

import numpy as np

from . import segnet
from .imaging import min_max_normalize
from .tensor import Tensor, checkpoint
from .training.metrics import EvalReport, confusion_matrix, scores_from_confusion


def load_model(path) -> tuple[segnet.ModelParams, dict]:
    """Rebuild the network from an SCKP file; entries outside the network are ignored."""
    tensors, meta = checkpoint.load(path)
    cfg = segnet.UNetConfig(**meta["net"])
    return segnet.ModelParams.from_state(cfg, tensors), meta


def predict_images(params: segnet.ModelParams, images01: np.ndarray, batch_size: int = 16) -> np.ndarray:
    """Label masks for a stack of normalized images [N, H, W]."""
    images01 = np.asarray(images01, dtype=np.float64)
    out = []
    for start in range(0, len(images01), batch_size):
        x = images01[start:start + batch_size, None]
        out.append(segnet.predict(params, Tensor(x)))
    return np.concatenate(out) if out else np.zeros((0,) + images01.shape[1:], dtype=np.int64)


def evaluate(params: segnet.ModelParams, images01: np.ndarray, masks: np.ndarray, batch_size: int = 16) -> EvalReport:
    """mIoU over the whole set (one confusion matrix accumulated across images)."""
    c = params.config.num_classes
    pred = predict_images(params, images01, batch_size)
    s = scores_from_confusion(confusion_matrix(pred, masks, c))
    return EvalReport(s.per_class_iou, s.miou, s.pixel_accuracy)


def normalize_stack(images: np.ndarray) -> np.ndarray:
    return np.stack([min_max_normalize(im) for im in images]) if len(images) else np.asarray(images, dtype=np.float64)
