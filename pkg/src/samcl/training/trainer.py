"""Training loop for every loss mode of the ablation."""

from __future__ import annotations

import csv
import io
import math
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .. import segnet
from .. import tensor as T
from ..data.formats import ensure_dir
from ..data.index import DatasetIndex, split_by_subject
from ..data.synth import synthetic_benchmark
from ..errors import ContractViolation, DivergenceError
from ..evaluate import evaluate, normalize_stack
from ..imaging import min_max_normalize
from ..loss import build_auxnet, class_swap, one_hot, rmi_distance, samcl_loss
from ..tensor import Optimizer, Tensor, checkpoint
from ..tiaug import AugConfig, augment
from .config import TrainConfig
from .loader import BatchLoader
from .losses import dice_loss, inverse_frequency_weights, weighted_bce_loss
from .metrics import EvalReport

CHECKPOINT_NAME = "checkpoint.sckp"
METRICS_NAME = "metrics.csv"


@dataclass
class Split:
    images: np.ndarray  # [N, H, W] °C
    masks: np.ndarray  # [N, H, W] int
    subjects: np.ndarray


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    clean: EvalReport
    occluded: EvalReport
    seconds: float = 0.0


@dataclass
class TrainResult:
    config: TrainConfig
    history: list[EpochRecord]
    best_epoch: int
    best_state: dict[str, np.ndarray]
    checkpoint_path: Optional[str] = None

    @property
    def best(self) -> EpochRecord:
        return self.history[self.best_epoch - 1]

    @property
    def loss_curve(self) -> list[float]:
        return [r.train_loss for r in self.history]


def load_data(cfg: TrainConfig) -> tuple[Split, Split]:
    d = cfg.data
    if d.source == "synthetic":
        (ti, tm, ts), (vi, vm, vs) = synthetic_benchmark(d.face, d.train_subjects, d.val_subjects,
                                                         d.frames_per_subject, d.seed)
        return Split(ti, tm, ts), Split(vi, vm, vs)
    idx = DatasetIndex.load(d.manifest)
    train_idx, val_idx = split_by_subject(idx, d.train_fraction, np.random.default_rng(d.split_seed))

    def read(sub: DatasetIndex) -> Split:
        pairs = [sub.load_pair(i) for i in range(len(sub))]
        return Split(np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs]),
                     np.array([e.subject_id for e in sub.entries]))

    return read(train_idx), read(val_idx)


def occluded_images(split: Split, aug: AugConfig, eval_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed occluded copy of a split: identical for every mode and training seed."""
    imgs, masks = [], []
    for i, (img, mask) in enumerate(zip(split.images, split.masks)):
        s = augment(img, mask, aug, np.random.default_rng(np.random.SeedSequence([int(eval_seed), int(i)])))
        imgs.append(s.image)
        masks.append(s.mask)
    return np.stack(imgs), np.stack(masks)


def training_aug(cfg: TrainConfig, image_shape: tuple[int, int]) -> Optional[AugConfig]:
    """Augmentation applied to training samples for this mode, or None."""
    aug = cfg.aug
    if aug.output_size is None:
        aug = _replace(aug, output_size=tuple(image_shape))
    if cfg.uses_tiaug:
        return aug
    if cfg.geometric_in_all_modes:
        return _replace(aug, occluder_count_range=(0, 0), noise=False)
    return None


def _replace(aug: AugConfig, **changes) -> AugConfig:
    d = asdict(aug)
    d.update(changes)
    return AugConfig(**d)


def make_transform(aug: Optional[AugConfig]):
    def transform(img, mask, rng):
        if aug is None:
            return min_max_normalize(img), mask
        s = augment(img, mask, aug, rng)
        return s.image, s.mask

    return transform


def _batch_rng(seed: int, epoch: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), 4, int(epoch), int(batch)]))


def train(cfg: TrainConfig, data: tuple[Split, Split] | None = None, out_dir: str | None = None,
          log: Callable[[str], None] | None = None) -> TrainResult:
    """Train one model; writes the best checkpoint and metrics CSV to ``out_dir`` if given."""
    train_split, val_split = data if data is not None else load_data(cfg)
    if len(train_split.images) == 0 or len(val_split.images) == 0:
        raise ContractViolation("training and validation sets must be non-empty")
    c = cfg.net.num_classes
    if train_split.masks.max() >= c or val_split.masks.max() >= c:
        raise ContractViolation(f"mask labels exceed num_classes={c}")
    segnet.check_input(cfg.net, (1, 1) + tuple(train_split.images.shape[1:]))

    params = segnet.build(cfg.net, np.random.default_rng(np.random.SeedSequence([cfg.seed, 0])))
    trainable = params.parameters()
    aux = None
    if cfg.uses_samcl:
        aux = build_auxnet(c, np.random.default_rng(np.random.SeedSequence([cfg.seed, 1])))
        trainable = trainable + aux.parameters()
    opt = Optimizer(trainable, cfg.optimizer)

    weights = None
    if cfg.loss_mode == "bce":
        weights = (np.asarray(cfg.class_weights) if cfg.class_weights is not None
                   else inverse_frequency_weights(one_hot(train_split.masks, c)))

    def loss_fn(logits: Tensor, target: np.ndarray, rng) -> Tensor:
        if cfg.loss_mode == "bce":
            return weighted_bce_loss(logits, target, weights)
        if cfg.loss_mode == "dice":
            return dice_loss(logits, target)
        if not cfg.uses_samcl:
            return rmi_distance(logits, target, cfg.loss)
        triplet = T.mul(samcl_loss(logits, target, class_swap(target, rng), aux, cfg.loss), cfg.lambda_samcl)
        if not cfg.samcl_with_base_loss:
            return triplet
        return T.add(rmi_distance(logits, target, cfg.loss), triplet)

    loader = BatchLoader(train_split.images, train_split.masks, cfg.batch_size,
                         make_transform(training_aug(cfg, train_split.images.shape[1:])), cfg.seed, cfg.workers)
    val_clean = normalize_stack(val_split.images)
    val_occ, val_occ_masks = occluded_images(val_split, cfg.eval_aug, cfg.eval_seed)

    history: list[EpochRecord] = []
    best_epoch, best_miou, best_state = 0, -1.0, {}
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        total, count = 0.0, 0
        for b, (x, y) in enumerate(loader.epoch(epoch)):
            target = one_hot(y, c)
            logits = segnet.forward(params, Tensor(x))
            loss = loss_fn(logits, target, _batch_rng(cfg.seed, epoch, b))
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(f"loss became {value} at epoch {epoch}, batch {b} (mode {cfg.loss_mode})")
            loss.backward()
            opt.step()
            opt.zero_grad()
            total += value * len(x)
            count += len(x)
        clean = evaluate(params, val_clean, val_split.masks, cfg.batch_size)
        occluded = evaluate(params, val_occ, val_occ_masks, cfg.batch_size)
        rec = EpochRecord(epoch, total / count, clean, occluded, time.perf_counter() - t0)
        history.append(rec)
        if clean.miou > best_miou:
            best_epoch, best_miou = epoch, clean.miou
            best_state = {k: v.copy() for k, v in params.state_dict().items()}
            if aux is not None:  # train-time only; inference ignores these entries
                best_state.update({k: v.copy() for k, v in aux.state_dict().items()})
        if log:
            log(f"[{cfg.loss_mode} seed={cfg.seed}] epoch {epoch}/{cfg.epochs} loss={rec.train_loss:.4f} "
                f"val mIoU clean={100 * clean.miou:.2f} occluded={100 * occluded.miou:.2f} ({rec.seconds:.1f}s)")

    result = TrainResult(cfg, history, best_epoch, best_state)
    if out_dir is not None:
        ensure_dir(out_dir)
        result.checkpoint_path = os.path.join(out_dir, CHECKPOINT_NAME)
        checkpoint.save(result.checkpoint_path, best_state, checkpoint_meta(result))
        with open(os.path.join(out_dir, METRICS_NAME), "w", encoding="utf-8", newline="") as fh:
            fh.write(metrics_csv(history, c))
    return result


def checkpoint_meta(result: TrainResult) -> dict:
    best = result.best
    return {
        "net": asdict(result.config.net),
        "loss_mode": result.config.loss_mode,
        "seed": result.config.seed,
        "epoch": result.best_epoch,
        "val_miou": best.clean.miou,
        "val_occluded_miou": best.occluded.miou,
    }


def metrics_csv(history: list[EpochRecord], num_classes: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "split", "loss", "miou", "pixel_accuracy"] + [f"iou_{c}" for c in range(num_classes)])

    def fmt(v):
        return "" if v is None else repr(float(v))

    for r in history:
        w.writerow([r.epoch, "train", fmt(r.train_loss), "", ""] + [""] * num_classes)
        for name, rep in (("val_clean", r.clean), ("val_occluded", r.occluded)):
            w.writerow([r.epoch, name, "", fmt(rep.miou), fmt(rep.pixel_accuracy)] + [fmt(v) for v in rep.per_class_iou])
    return buf.getvalue()
