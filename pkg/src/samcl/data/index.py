"""Dataset manifests and subject-disjoint splits."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ContractViolation, FormatError
from .formats import load_landmarks, load_mask, load_thermal
from .landmarks import RegionDefinition, default_regions, landmarks_to_mask

MANIFEST_NAME = "manifest.json"


@dataclass
class IndexEntry:
    image: str
    mask: str  # PGM mask or landmark text file
    subject_id: str
    frame_id: str = ""


@dataclass
class DatasetIndex:
    entries: list[IndexEntry] = field(default_factory=list)
    root: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def subjects(self) -> list[str]:
        return sorted({e.subject_id for e in self.entries})

    def path(self, rel: str) -> str:
        return rel if os.path.isabs(rel) else os.path.join(self.root, rel)

    def to_json(self) -> str:
        body = {"entries": [asdict(e) for e in self.entries], "subjects": self.subjects}
        return json.dumps(body, indent=1, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path, check_paths: bool = True) -> "DatasetIndex":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise FormatError(f"cannot read manifest: {exc.strerror}", None, str(path)) from exc
        except json.JSONDecodeError as exc:
            raise FormatError(f"manifest is not valid JSON: {exc.msg}", exc.pos, str(path)) from exc
        try:
            entries = [IndexEntry(**e) for e in doc["entries"]]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed manifest entry: {exc}", None, str(path)) from exc
        idx = cls(entries, os.path.dirname(os.path.abspath(path)))
        for e in entries:
            if not e.subject_id:
                raise ContractViolation(f"manifest entry {e.image!r} has an empty subject_id")
            if check_paths:
                for rel in (e.image, e.mask):
                    if not os.path.exists(idx.path(rel)):
                        raise FormatError("file listed in manifest does not exist", None, idx.path(rel))
        return idx

    def load_pair(self, i: int, regions: RegionDefinition | None = None):
        e = self.entries[i]
        img = load_thermal(self.path(e.image))
        if e.mask.endswith(".pgm"):
            mask = load_mask(self.path(e.mask))
        else:
            mask = landmarks_to_mask(load_landmarks(self.path(e.mask)), regions or default_regions(), *img.shape)
        if mask.shape != img.shape:
            raise ContractViolation(f"{e.mask}: mask {mask.shape} does not match image {img.shape}")
        return img, mask

    def subset(self, subjects) -> "DatasetIndex":
        keep = set(subjects)
        return DatasetIndex([e for e in self.entries if e.subject_id in keep], self.root)


def split_subjects(subjects, train_fraction: float, rng: np.random.Generator) -> tuple[list[str], list[str]]:
    subjects = sorted(set(subjects))
    n = len(subjects)
    if n < 2:
        raise ContractViolation(f"split_by_subject needs at least 2 distinct subjects, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise ContractViolation(f"train_fraction must be in (0, 1), got {train_fraction}")
    # round toward train but always keep one subject for validation
    n_train = min(max(math.ceil(round(train_fraction * n, 9)), 1), n - 1)
    order = rng.permutation(n)
    train = sorted(subjects[i] for i in order[:n_train])
    val = sorted(subjects[i] for i in order[n_train:])
    return train, val


def split_by_subject(idx: DatasetIndex, train_fraction: float = 0.85, rng: np.random.Generator | None = None):
    rng = rng if rng is not None else np.random.default_rng(0)
    train, val = split_subjects(idx.subjects, train_fraction, rng)
    return idx.subset(train), idx.subset(val)
