"""Image preprocessing shared by training and inference."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateRangeError


def min_max_normalize(img: np.ndarray) -> np.ndarray:
    """Map an image linearly onto [0, 1]; the extremes land exactly on 0 and 1."""
    img = np.asarray(img, dtype=np.float64)
    lo, hi = img.min(), img.max()
    if not hi > lo:
        raise DegenerateRangeError(f"cannot normalize a constant image (all values {lo})")
    return (img - lo) / (hi - lo)
