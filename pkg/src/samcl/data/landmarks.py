"""Landmark annotations to dense label masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation
from .raster import polygon_area, polygon_mask

CLASS_NAMES = ("background", "chin", "mouth", "nose", "eyes", "eyebrows")


@dataclass
class LandmarkSet:
    points: np.ndarray  # [K, 2] as (x, y)
    subject_id: str = ""
    frame_id: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ContractViolation(f"landmarks must be [K, 2], got shape {self.points.shape}")


@dataclass
class RegionDefinition:
    """Class index -> closed boundaries (each an ordered list of landmark indices).

    ``paint_order`` lists classes from lowest to highest priority; later
    classes overwrite earlier ones where polygons overlap.
    """

    boundaries: dict[int, list[list[int]]]
    paint_order: list[int]
    names: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        self.boundaries = {int(k): [list(b) for b in v] for k, v in self.boundaries.items()}
        classes = sorted(self.boundaries)
        if classes != list(range(1, len(classes) + 1)):
            raise ContractViolation(f"region classes must be dense 1..C-1, got {classes}")
        if sorted(self.paint_order) != classes:
            raise ContractViolation(f"paint_order {self.paint_order} must list each class {classes} once")
        for cls, polys in self.boundaries.items():
            for poly in polys:
                if len(poly) < 3:
                    raise ContractViolation(f"region {self.name(cls)!r}: boundary needs >= 3 points, got {len(poly)}")

    @property
    def num_classes(self) -> int:
        return len(self.boundaries) + 1

    def name(self, cls: int) -> str:
        return self.names[cls] if cls < len(self.names) else f"class{cls}"


def default_regions() -> RegionDefinition:
    """Grouping of the common 68-point annotation into five facial regions."""
    return RegionDefinition(
        boundaries={
            1: [list(range(0, 17))],
            2: [list(range(48, 60))],
            3: [[27, 31, 32, 33, 34, 35]],
            4: [list(range(36, 42)), list(range(42, 48))],
            5: [list(range(17, 22)), list(range(22, 27))],
        },
        paint_order=[1, 2, 3, 5, 4],  # chin < mouth < nose < eyebrows < eyes
    )


def landmarks_to_mask(lm, regions: RegionDefinition, height: int, width: int) -> np.ndarray:
    """Even-odd fill of each region boundary, painted in priority order; unfilled pixels are 0."""
    pts = lm.points if isinstance(lm, LandmarkSet) else np.asarray(lm, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ContractViolation(f"landmarks must be [K, 2], got shape {pts.shape}")
    out_of_bounds = (pts[:, 0] < 0) | (pts[:, 0] >= width) | (pts[:, 1] < 0) | (pts[:, 1] >= height)
    if out_of_bounds.any():
        i = int(np.argmax(out_of_bounds))
        raise ContractViolation(f"landmark {i} at {tuple(pts[i])} lies outside the {height}x{width} image")
    mask = np.zeros((height, width), dtype=np.int64)
    for cls in regions.paint_order:
        for poly in regions.boundaries[cls]:
            if max(poly) >= len(pts):
                raise ContractViolation(f"region {regions.name(cls)!r} references landmark {max(poly)} of {len(pts)}")
            verts = pts[poly]
            distinct = np.unique(verts, axis=0)
            scale = max(float(np.ptp(verts)), 1.0)
            if len(distinct) < 3 or polygon_area(verts) <= 1e-12 * scale * scale:
                raise ContractViolation(f"region {regions.name(cls)!r}: degenerate boundary (collinear or < 3 distinct points)")
            mask[polygon_mask(verts, height, width)] = cls
    return mask
