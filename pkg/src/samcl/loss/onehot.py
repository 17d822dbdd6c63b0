"""One-hot encoding and class-swapped negatives."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from ..errors import ContractViolation


def one_hot(mask: np.ndarray, num_classes: int) -> np.ndarray:
    """[N, H, W] (or [H, W]) integer labels -> float [N, C, H, W] indicators."""
    mask = np.asarray(mask)
    if mask.ndim == 2:
        mask = mask[None]
    if mask.ndim != 3:
        raise ContractViolation(f"one_hot: expected [N, H, W] labels, got shape {mask.shape}")
    bad = (mask < 0) | (mask >= num_classes)
    if bad.any():
        n, r, c = (int(v) for v in np.argwhere(bad)[0])
        raise ContractViolation(
            f"one_hot: label {int(mask[n, r, c])} at (n={n}, row={r}, col={c}) outside [0, {num_classes})"
        )
    classes = np.arange(num_classes)[None, :, None, None]
    return (mask[:, None, :, :] == classes).astype(np.float64)


@dataclass
class SwappedMask:
    """Channel-permuted one-hot mask: ``tensor[:, c] == source[:, permutation[c]]``."""

    tensor: np.ndarray
    permutation: tuple[int, ...]


def is_derangement(perm) -> bool:
    return all(p != i for i, p in enumerate(perm))


def derangements(n: int) -> list[tuple[int, ...]]:
    """All fixed-point-free permutations of ``range(n)`` (small n only)."""
    return [p for p in permutations(range(n)) if is_derangement(p)]


def sample_derangement(n: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Uniform over derangements by rejection from uniform permutations."""
    if n < 2:
        raise ContractViolation(f"class swap needs at least 2 classes, got {n}")
    while True:
        perm = rng.permutation(n)
        if np.all(perm != np.arange(n)):
            return tuple(int(v) for v in perm)


def class_swap(y: np.ndarray, rng: np.random.Generator) -> SwappedMask:
    y = np.asarray(y)
    if y.ndim != 4:
        raise ContractViolation(f"class_swap: expected [N, C, H, W], got shape {y.shape}")
    perm = sample_derangement(y.shape[1], rng)
    return SwappedMask(np.ascontiguousarray(y[:, list(perm)]), perm)
