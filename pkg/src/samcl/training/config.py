"""Run configuration: one JSON document validated before any work starts."""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

from pydantic import TypeAdapter, ValidationError

from ..data.synth import SyntheticFaceConfig
from ..errors import ConfigError, ContractViolation
from ..loss.rmi import LossConfig
from ..segnet import UNetConfig
from ..tensor.optim import OptimizerConfig
from ..tiaug.config import AugConfig

LOSS_MODES = ("bce", "dice", "rmi", "rmi+tiaug", "rmi+tiaug+samcl")


def _eval_aug() -> AugConfig:
    return AugConfig.occlusion_only(occluder_count_range=(1, 5))


@dataclass
class DataConfig:
    """Where images come from.

    ``source="synthetic"`` builds subject-disjoint pools of procedural faces;
    ``source="manifest"`` reads a manifest and splits it by subject.
    """

    source: str = "synthetic"
    manifest: Optional[str] = None
    train_fraction: float = 0.85
    split_seed: int = 0
    train_subjects: int = 20
    val_subjects: int = 5
    frames_per_subject: int = 10
    seed: int = 0
    face: SyntheticFaceConfig = field(default_factory=SyntheticFaceConfig)

    def __post_init__(self):
        if self.source not in ("synthetic", "manifest"):
            raise ContractViolation(f"data.source must be 'synthetic' or 'manifest', got {self.source!r}")
        if self.source == "manifest" and not self.manifest:
            raise ContractViolation("data.manifest is required when source is 'manifest'")
        if min(self.train_subjects, self.val_subjects, self.frames_per_subject) < 1:
            raise ContractViolation("subject and frame counts must be >= 1")


@dataclass
class TrainConfig:
    loss_mode: str = "rmi+tiaug+samcl"
    epochs: int = 20
    batch_size: int = 16
    seed: int = 0
    lambda_samcl: float = 1.0
    samcl_with_base_loss: bool = True  # False optimizes the triplet loss alone
    geometric_in_all_modes: bool = True
    class_weights: Optional[list[float]] = None  # bce only; None means inverse frequency
    workers: int = 0
    eval_seed: int = 1234
    net: UNetConfig = field(default_factory=lambda: UNetConfig(base_channels=8))
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    aug: AugConfig = field(default_factory=AugConfig)
    eval_aug: AugConfig = field(default_factory=_eval_aug)
    data: DataConfig = field(default_factory=DataConfig)

    def __post_init__(self):
        if self.loss_mode not in LOSS_MODES:
            raise ContractViolation(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if self.batch_size < 1:
            raise ContractViolation(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ContractViolation(f"epochs must be >= 1, got {self.epochs}")
        if self.workers < 0:
            raise ContractViolation(f"workers must be >= 0, got {self.workers}")
        if self.lambda_samcl < 0:
            raise ContractViolation(f"lambda_samcl must be >= 0, got {self.lambda_samcl}")

    @property
    def uses_tiaug(self) -> bool:
        return "tiaug" in self.loss_mode

    @property
    def uses_samcl(self) -> bool:
        return self.loss_mode.endswith("samcl")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


def _pointer(loc) -> str:
    return "/" + "/".join(str(p) for p in loc)


def _unknown_keys(cls, doc: Any, loc: tuple = ()) -> None:
    """Reject keys that no dataclass field accepts (pydantic ignores them for dataclasses)."""
    if not dataclasses.is_dataclass(cls) or not isinstance(doc, dict):
        return
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key, value in doc.items():
        if key not in names:
            raise ConfigError(f"unknown key {key!r}", _pointer(loc + (key,)))
        _unknown_keys(hints.get(key), value, loc + (key,))


def _refine_loc(cls, loc: tuple, msg: str) -> tuple:
    """Errors raised by __post_init__ point at the section; descend to the field they name."""
    for part in loc:
        if not dataclasses.is_dataclass(cls):
            return loc
        cls = typing.get_type_hints(cls).get(part)
    if dataclasses.is_dataclass(cls):
        word = msg.split(" ", 1)[0].rstrip(":").rsplit(".", 1)[-1]
        if word in {f.name for f in dataclasses.fields(cls)}:
            return loc + (word,)
    return loc


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def config_from_dict(doc: Any, cls=TrainConfig):
    """Validate a JSON-like document into ``cls``; unspecified fields keep their defaults.

    Nested sections are merged over the section defaults, so ``{"aug": {"netd_max": 0.05}}``
    changes only that field.
    """
    if not isinstance(doc, dict):
        raise ConfigError(f"config must be a JSON object, got {type(doc).__name__}", "")
    _unknown_keys(cls, doc)
    merged = _merge(asdict(cls()), doc)
    try:
        return TypeAdapter(cls).validate_python(merged)
    except ValidationError as exc:
        err = exc.errors()[0]
        msg = err["msg"].removeprefix("Value error, ")
        raise ConfigError(msg, _pointer(_refine_loc(cls, tuple(err["loc"]), msg))) from None


def load_config(path, cls=TrainConfig):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", "") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", "") from None
    return config_from_dict(doc, cls)
