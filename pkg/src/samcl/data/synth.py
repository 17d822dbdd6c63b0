"""Procedural controlled-setting thermal faces.

A face is described by 68 landmarks laid out on a jittered ellipse; the label
mask comes from the same landmark-to-mask path used for annotated data. The
labeled face is painted warm and everything else cool, with temperatures
clipped into two disjoint ranges so the histogram is bimodal by construction.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import ContractViolation
from .formats import ensure_dir, save_mask, save_thermal
from .index import MANIFEST_NAME, DatasetIndex, IndexEntry
from .landmarks import LandmarkSet, default_regions, landmarks_to_mask


def _default_offsets() -> dict[str, float]:
    return {"chin": 0.0, "mouth": 0.6, "nose": -1.2, "eyes": 1.0, "eyebrows": -0.6}


@dataclass
class SyntheticFaceConfig:
    image_size: tuple[int, int] = (64, 64)
    background_range: tuple[float, float] = (18.0, 25.0)
    face_range: tuple[float, float] = (31.0, 36.0)
    region_offsets: dict[str, float] = field(default_factory=_default_offsets)
    scale_range: tuple[float, float] = (0.85, 1.05)
    center_jitter: float = 0.05  # fraction of image size
    rotation_jitter: float = 8.0  # degrees
    landmark_jitter: float = 0.4  # pixels
    texture_sigma: float = 0.25
    seed: int = 0

    def __post_init__(self):
        (blo, bhi), (flo, fhi) = self.background_range, self.face_range
        if not (blo < bhi and flo < fhi):
            raise ContractViolation("background_range and face_range must be non-empty")
        if not flo > bhi:
            raise ContractViolation(f"face_range {self.face_range} must lie strictly above background_range {self.background_range}")
        if min(self.image_size) < 16:
            raise ContractViolation(f"image_size {self.image_size} too small (min 16)")
        unknown = set(self.region_offsets) - set(_default_offsets())
        if unknown:
            raise ContractViolation(f"unknown regions in region_offsets: {sorted(unknown)}")


@dataclass
class SubjectParams:
    """Per-identity constants shared by all frames of one synthetic subject."""

    scale: float
    aspect: float
    face_base: float
    background_base: float
    gradient: tuple[float, float]
    eye_spread: float
    mouth_width: float


def sample_subject(cfg: SyntheticFaceConfig, rng: np.random.Generator) -> SubjectParams:
    flo, fhi = cfg.face_range
    blo, bhi = cfg.background_range
    margin_f = min(2.0, (fhi - flo) / 3)
    margin_b = min(1.5, (bhi - blo) / 3)
    return SubjectParams(
        scale=float(rng.uniform(*cfg.scale_range)),
        aspect=float(rng.uniform(0.68, 0.82)),
        face_base=float(rng.uniform(flo + margin_f, fhi - margin_f)),
        background_base=float(rng.uniform(blo + margin_b, bhi - margin_b)),
        gradient=(float(rng.uniform(-0.3, 0.3)), float(rng.uniform(-0.3, 0.3))),
        eye_spread=float(rng.uniform(0.34, 0.42)),
        mouth_width=float(rng.uniform(0.28, 0.38)),
    )


def face_landmarks_local(subject: SubjectParams) -> np.ndarray:
    """68 points in face-normalized (u, v): u right, v down, face ellipse is the unit circle."""
    pts = np.zeros((68, 2))
    t = np.linspace(0.0, math.pi, 17)
    pts[0:17] = np.stack([-0.97 * np.cos(t), -0.45 + 1.42 * np.sin(t)], axis=1)
    k = np.linspace(0.0, 1.0, 5)
    for start, sign in ((17, -1), (22, 1)):
        u = sign * (0.12 + 0.5 * (k if sign > 0 else k[::-1]))
        pts[start:start + 5] = np.stack([u, -0.40 - 0.16 * np.sin(math.pi * (k if sign > 0 else k[::-1]))], axis=1)
    pts[27:31] = np.stack([np.zeros(4), np.linspace(-0.2, 0.18, 4)], axis=1)
    pts[31:36] = np.stack([np.linspace(-0.2, 0.2, 5), 0.28 + 0.04 * np.sin(math.pi * k)], axis=1)
    a = np.deg2rad([180, 120, 60, 0, -60, -120])
    for start, cx in ((36, -subject.eye_spread), (42, subject.eye_spread)):
        pts[start:start + 6] = np.stack([cx + 0.16 * np.cos(a), -0.16 - 0.08 * np.sin(a)], axis=1)
    m = np.linspace(math.pi, -math.pi, 12, endpoint=False)
    pts[48:60] = np.stack([subject.mouth_width * np.cos(m), 0.55 - 0.12 * np.sin(m)], axis=1)
    m = np.linspace(math.pi, -math.pi, 8, endpoint=False)
    pts[60:68] = np.stack([0.7 * subject.mouth_width * np.cos(m), 0.55 - 0.05 * np.sin(m)], axis=1)
    return pts


def synth_face_sample(cfg: SyntheticFaceConfig, rng: np.random.Generator, subject: SubjectParams | None = None):
    """(image °C, label mask, LandmarkSet) for one frame."""
    if subject is None:
        subject = sample_subject(cfg, rng)
    h, w = cfg.image_size
    cx = w / 2 + rng.uniform(-1, 1) * cfg.center_jitter * w
    cy = h / 2 + rng.uniform(-1, 1) * cfg.center_jitter * h
    phi = math.radians(rng.uniform(-1, 1) * cfg.rotation_jitter)
    ry = 0.40 * h * subject.scale
    rx = ry * subject.aspect
    c, s = math.cos(phi), math.sin(phi)

    local = face_landmarks_local(subject)
    x = cx + c * rx * local[:, 0] - s * ry * local[:, 1]
    y = cy + s * rx * local[:, 0] + c * ry * local[:, 1]
    pts = np.stack([x, y], axis=1)
    if cfg.landmark_jitter > 0:
        pts = pts + rng.normal(0.0, cfg.landmark_jitter, size=pts.shape)
    pts[:, 0] = np.clip(pts[:, 0], 0.0, np.nextafter(w, 0))
    pts[:, 1] = np.clip(pts[:, 1], 0.0, np.nextafter(h, 0))
    regions = default_regions()
    mask = landmarks_to_mask(pts, regions, h, w)

    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    u = (c * (xs - cx) + s * (ys - cy)) / rx
    v = (-s * (xs - cx) + c * (ys - cy)) / ry
    face = mask != 0

    texture = ndimage.gaussian_filter(rng.normal(0.0, 1.0, size=(h, w)), 1.5)
    texture *= cfg.texture_sigma / max(float(texture.std()), 1e-12)
    gx, gy = subject.gradient
    img = subject.background_base + gx * (xs / w - 0.5) + gy * (ys / h - 0.5) + 0.4 * texture
    img = np.clip(img, *cfg.background_range)

    offsets = np.zeros(regions.num_classes)
    for cls in range(1, regions.num_classes):
        offsets[cls] = cfg.region_offsets.get(regions.name(cls), 0.0)
    warm = subject.face_base + offsets[mask] + texture - 0.6 * np.clip(u * u + v * v - 0.5, 0.0, None)
    img = np.where(face, np.clip(warm, *cfg.face_range), img)
    return img, mask, LandmarkSet(pts)


def synth_face(cfg: SyntheticFaceConfig, rng: np.random.Generator, subject: SubjectParams | None = None):
    img, mask, _ = synth_face_sample(cfg, rng, subject)
    return img, mask


def _subject_rng(seed: int, subject: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0, int(subject)]))


def _frame_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), 1, int(index)]))


def synth_subject_frames(cfg: SyntheticFaceConfig, subject_ids, frames: int, seed: int):
    """Arrays (images [N,H,W], masks [N,H,W], subject ids) with ``frames`` per subject."""
    images, masks, sids = [], [], []
    for sid in subject_ids:
        subject = sample_subject(cfg, _subject_rng(seed, sid))
        for f in range(frames):
            img, mask = synth_face(cfg, _frame_rng(seed, sid * 100003 + f), subject)
            images.append(img)
            masks.append(mask)
            sids.append(int(sid))
    return np.stack(images), np.stack(masks), np.array(sids)


def synthetic_benchmark(cfg: SyntheticFaceConfig | None = None, train_subjects: int = 20,
                        val_subjects: int = 5, frames: int = 10, seed: int = 0):
    """Subject-disjoint train and val pools: ((img, mask, sid), (img, mask, sid))."""
    cfg = cfg or SyntheticFaceConfig()
    train = synth_subject_frames(cfg, range(train_subjects), frames, seed)
    val = synth_subject_frames(cfg, range(train_subjects, train_subjects + val_subjects), frames, seed)
    return train, val


def write_dataset(out_dir, count: int, subjects: int, cfg: SyntheticFaceConfig, seed: int) -> DatasetIndex:
    """Write ``count`` THRM/PGM pairs (frames dealt round-robin over subjects) and a manifest."""
    if count < 0 or subjects < 1:
        raise ContractViolation(f"need count >= 0 and subjects >= 1, got {count}, {subjects}")
    ensure_dir(out_dir)
    cache: dict[int, SubjectParams] = {}
    entries = []
    for i in range(count):
        sid = i % subjects
        if sid not in cache:
            cache[sid] = sample_subject(cfg, _subject_rng(seed, sid))
        img, mask = synth_face(cfg, _frame_rng(seed, i), cache[sid])
        stem = f"s{sid:03d}_f{i // subjects:04d}"
        save_thermal(os.path.join(out_dir, stem + ".thrm"), img)
        save_mask(os.path.join(out_dir, stem + ".pgm"), mask)
        entries.append(IndexEntry(stem + ".thrm", stem + ".pgm", f"subject{sid:03d}", f"{i // subjects:04d}"))
    idx = DatasetIndex(entries, os.path.abspath(out_dir))
    idx.save(os.path.join(out_dir, MANIFEST_NAME))
    return idx


@dataclass
class SynthDataConfig:
    """Configuration document of the synth-data command."""

    subjects: int = 10
    face: SyntheticFaceConfig = field(default_factory=SyntheticFaceConfig)

    def __post_init__(self):
        if self.subjects < 1:
            raise ContractViolation(f"subjects must be >= 1, got {self.subjects}")
