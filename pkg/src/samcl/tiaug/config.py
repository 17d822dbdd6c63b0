"""Augmentation configuration and the record of sampled parameters."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from ..errors import ContractViolation

SHAPES = ("ellipse", "rectangle", "polygon", "strand")


def _check_range(name: str, rng: tuple, lo: float | None = None, hi: float | None = None) -> None:
    if len(rng) != 2 or rng[0] > rng[1]:
        raise ContractViolation(f"{name}: empty range {rng}")
    if lo is not None and rng[0] < lo:
        raise ContractViolation(f"{name}: lower bound {rng[0]} below {lo}")
    if hi is not None and rng[1] > hi:
        raise ContractViolation(f"{name}: upper bound {rng[1]} above {hi}")


@dataclass
class AugConfig:
    """Sampling ranges for occluders, sensor noise and geometric transforms.

    Hot objects sit ``hot_offset_range`` degrees above the face mean, cold ones
    ``cold_offset_range`` degrees below the background mean. ``output_size``
    crops/pads the geometrically transformed image back to a fixed size.
    """

    occluder_count_range: tuple[int, int] = (0, 5)
    size_range: tuple[float, float] = (0.05, 0.40)
    hot_offset_range: tuple[float, float] = (2.0, 15.0)
    cold_offset_range: tuple[float, float] = (2.0, 15.0)
    enable_hot: bool = True
    enable_cold: bool = True
    ensure_both_regimes: bool = True
    edge_softness_range: tuple[float, float] = (0.0, 3.0)
    shapes: tuple[str, ...] = SHAPES
    netd_max: float = 0.1
    noise: bool = True
    hflip_p: float = 0.5
    vflip_p: float = 0.5
    rotation_p: float = 0.5
    rotation_degrees: float = 20.0
    blur_p: float = 0.3
    blur_sigma_range: tuple[float, float] = (0.5, 1.5)
    resize_p: float = 0.5
    resize_range: tuple[float, float] = (0.5, 2.0)
    output_size: Optional[tuple[int, int]] = None
    rng_seed: int = 0

    def __post_init__(self):
        _check_range("occluder_count_range", self.occluder_count_range, lo=0)
        _check_range("size_range", self.size_range, lo=0.0)
        _check_range("hot_offset_range", self.hot_offset_range, lo=0.0)
        _check_range("cold_offset_range", self.cold_offset_range, lo=0.0)
        _check_range("edge_softness_range", self.edge_softness_range, lo=0.0)
        _check_range("blur_sigma_range", self.blur_sigma_range, lo=0.0)
        _check_range("resize_range", self.resize_range, lo=0.5, hi=2.0)
        if self.netd_max <= 0:
            raise ContractViolation(f"netd_max must be > 0, got {self.netd_max}")
        if not (self.enable_hot or self.enable_cold) and self.occluder_count_range[1] > 0:
            raise ContractViolation("occluders requested but both hot and cold regimes are disabled")
        unknown = set(self.shapes) - set(SHAPES)
        if unknown or not self.shapes:
            raise ContractViolation(f"shapes must be a non-empty subset of {SHAPES}, got {self.shapes}")
        for name in ("hflip_p", "vflip_p", "rotation_p", "blur_p", "resize_p"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ContractViolation(f"{name} must be a probability, got {getattr(self, name)}")

    @classmethod
    def disabled(cls, **overrides) -> "AugConfig":
        """No occluders, no noise, no geometry."""
        base = dict(
            occluder_count_range=(0, 0), noise=False, hflip_p=0.0, vflip_p=0.0,
            rotation_p=0.0, blur_p=0.0, resize_p=0.0,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def geometric_only(cls, **overrides) -> "AugConfig":
        base = dict(occluder_count_range=(0, 0), noise=False)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def occlusion_only(cls, **overrides) -> "AugConfig":
        base = dict(hflip_p=0.0, vflip_p=0.0, rotation_p=0.0, blur_p=0.0, resize_p=0.0)
        base.update(overrides)
        return cls(**base)


@dataclass
class OccluderParams:
    """One synthesized object in output-image pixel coordinates.

    ``vertices`` are (x, y) offsets from ``center`` for polygons and strands.
    ``temperature_offset`` is signed: positive above the face mean (hot),
    negative below the background mean (cold).
    """

    shape_kind: str
    center: tuple[float, float]  # (row, col)
    size: float  # fraction of min(H, W)
    orientation: float  # radians
    aspect: float
    regime: str  # "hot" | "cold"
    temperature_offset: float
    edge_softness: float
    thickness: float = 0.0
    vertices: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class GeometricParams:
    hflip: bool = False
    vflip: bool = False
    angle: float = 0.0  # degrees, counter-clockwise
    resize: float = 1.0
    blur_sigma: float = 0.0
    output_size: Optional[tuple[int, int]] = None


@dataclass
class AugParams:
    """Everything needed to replay an augmentation bit-exactly."""

    geometric: GeometricParams
    occluders: list[OccluderParams]
    noise_seed: Optional[int]
    netd_max: float
    face_mean: float
    background_mean: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "AugParams":
        geo = dict(d["geometric"])
        if geo.get("output_size") is not None:
            geo["output_size"] = tuple(geo["output_size"])
        occ = []
        for o in d["occluders"]:
            o = dict(o)
            o["center"] = tuple(o["center"])
            o["vertices"] = [tuple(v) for v in o.get("vertices", [])]
            occ.append(OccluderParams(**o))
        known = {f.name for f in fields(cls)} - {"geometric", "occluders"}
        rest = {k: d[k] for k in known}
        return cls(geometric=GeometricParams(**geo), occluders=occ, **rest)

    @classmethod
    def from_json(cls, text: str) -> "AugParams":
        return cls.from_dict(json.loads(text))
