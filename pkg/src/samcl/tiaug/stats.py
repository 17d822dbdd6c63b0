"""Histogram statistics used to quantify how augmentation breaks bimodality."""

from __future__ import annotations

import numpy as np

from ..errors import StatisticsUnavailableError


def histogram_edges(img: np.ndarray, bins: int = 32) -> np.ndarray:
    return np.histogram_bin_edges(np.asarray(img, dtype=np.float64), bins=bins)


def modal_bins(img: np.ndarray, mask: np.ndarray, edges: np.ndarray) -> tuple[int, int]:
    """Indices of the most populated bin among background pixels and among face pixels."""
    fg = np.asarray(mask) != 0
    if not fg.any() or fg.all():
        raise StatisticsUnavailableError("modal bins need both face and background pixels")
    bg_counts, _ = np.histogram(img[~fg], bins=edges)
    fg_counts, _ = np.histogram(img[fg], bins=edges)
    return int(np.argmax(bg_counts)), int(np.argmax(fg_counts))


def mass_outside_modes(img: np.ndarray, edges: np.ndarray, modes) -> float:
    """Fraction of pixels not falling in any of the ``modes`` bins (out-of-range pixels count as outside)."""
    v = np.asarray(img, dtype=np.float64).ravel()
    idx = np.searchsorted(edges, v, side="right") - 1
    idx[v == edges[-1]] = len(edges) - 2  # last bin is closed
    inside = np.zeros(v.shape, dtype=bool)
    for m in modes:
        inside |= idx == m
    return float(1.0 - inside.mean())


def bimodality_disruption(original: np.ndarray, augmented: np.ndarray, mask: np.ndarray, bins: int = 32):
    """(before, after) fraction of mass outside the original background and face modal bins."""
    edges = histogram_edges(original, bins)
    modes = modal_bins(original, mask, edges)
    return mass_outside_modes(original, edges, modes), mass_outside_modes(augmented, edges, modes)
