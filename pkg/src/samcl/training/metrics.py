"""Segmentation metrics from a confusion matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolation


def confusion_matrix(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> np.ndarray:
    """counts[g, p] = number of pixels with ground truth g predicted as p."""
    pred = np.asarray(pred, dtype=np.int64)
    gt = np.asarray(gt, dtype=np.int64)
    if pred.shape != gt.shape:
        raise ContractViolation(f"confusion_matrix: pred {pred.shape} vs gt {gt.shape}")
    idx = gt.ravel() * num_classes + pred.ravel()
    return np.bincount(idx, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


@dataclass
class SegScores:
    per_class_iou: list[float | None]
    miou: float  # fraction in [0, 1]
    pixel_accuracy: float

    @property
    def miou_percent(self) -> float:
        return 100.0 * self.miou


def scores_from_confusion(conf: np.ndarray) -> SegScores:
    conf = np.asarray(conf, dtype=np.int64)
    inter = np.diag(conf)
    union = conf.sum(axis=0) + conf.sum(axis=1) - inter
    present = union > 0
    iou = np.zeros(len(conf))
    iou[present] = inter[present] / union[present]
    miou = float(iou[present].mean()) if present.any() else 0.0
    total = conf.sum()
    acc = float(inter.sum() / total) if total else 0.0
    return SegScores([float(v) if ok else None for v, ok in zip(iou, present)], miou, acc)


def miou(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> SegScores:
    """Per-class IoU and their mean; classes absent from both masks are skipped."""
    return scores_from_confusion(confusion_matrix(pred, gt, num_classes))


@dataclass
class EvalReport:
    per_class_iou: list[float | None]
    miou: float
    pixel_accuracy: float
    loss_curve: list[float] = field(default_factory=list)

    @property
    def miou_percent(self) -> float:
        return 100.0 * self.miou
