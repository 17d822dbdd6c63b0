"""Even-odd scanline polygon fill.

Pixel (row r, col c) is sampled at the point (x=c, y=r). An edge crosses the
scanline y when exactly one endpoint lies strictly above it; the crossing
x-coordinates sorted in pairs [x0, x1) give the filled spans. This is the
same predicate as the classic crossing-number point-in-polygon test, so the
two agree pixel for pixel.
"""

from __future__ import annotations

import math

import numpy as np


def polygon_mask(vertices, height: int, width: int) -> np.ndarray:
    """Boolean [height, width] mask of pixels inside the closed polygon ``vertices`` (x, y)."""
    pts = np.asarray(vertices, dtype=np.float64)
    mask = np.zeros((height, width), dtype=bool)
    if len(pts) < 3:
        return mask
    xi, yi = pts[:, 0], pts[:, 1]
    xj, yj = np.roll(xi, 1), np.roll(yi, 1)  # previous vertex closes each edge
    row_lo = max(0, math.ceil(yi.min()))
    row_hi = min(height - 1, math.floor(yi.max()))
    for y in range(row_lo, row_hi + 1):
        crosses = (yi > y) != (yj > y)
        if not crosses.any():
            continue
        a, b, c, d = xi[crosses], yi[crosses], xj[crosses], yj[crosses]
        xs = np.sort((c - a) * (y - b) / (d - b) + a)
        for start, stop in zip(xs[0::2], xs[1::2]):
            c0 = max(0, math.ceil(start))
            c1 = min(width, math.ceil(stop))
            if c1 > c0:
                mask[y, c0:c1] = True
    return mask


def polygon_area(vertices) -> float:
    """Unsigned shoelace area."""
    pts = np.asarray(vertices, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
