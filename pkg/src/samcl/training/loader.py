"""Deterministic shuffled mini-batches with optional threaded preprocessing.

Each sample's randomness comes from ``SeedSequence([seed, tag, epoch, index])``
so the output does not depend on how many workers produced it. With workers,
the next batch is prepared while the current one is consumed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator

import numpy as np

SHUFFLE_TAG = 2
SAMPLE_TAG = 3

Transform = Callable[[np.ndarray, np.ndarray, np.random.Generator], tuple[np.ndarray, np.ndarray]]


def sample_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), SAMPLE_TAG, int(epoch), int(index)]))


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng(np.random.SeedSequence([int(seed), SHUFFLE_TAG, int(epoch)])).permutation(n)


class BatchLoader:
    def __init__(self, images: np.ndarray, masks: np.ndarray, batch_size: int, transform: Transform,
                 seed: int, workers: int = 0):
        self.images = images
        self.masks = masks
        self.batch_size = batch_size
        self.transform = transform
        self.seed = seed
        self.workers = workers

    def __len__(self) -> int:
        return -(-len(self.images) // self.batch_size)

    def _one(self, epoch: int, index: int):
        return self.transform(self.images[index], self.masks[index], sample_rng(self.seed, epoch, index))

    @staticmethod
    def _stack(items):
        xs, ys = zip(*items)
        return np.stack(xs)[:, None], np.stack(ys)

    def epoch(self, epoch: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yields (images [B,1,H,W] in [0,1], masks [B,H,W])."""
        order = epoch_order(self.seed, epoch, len(self.images))
        batches = [order[i:i + self.batch_size] for i in range(0, len(order), self.batch_size)]
        if self.workers <= 0:
            for idx in batches:
                yield self._stack([self._one(epoch, i) for i in idx])
            return
        with ThreadPoolExecutor(self.workers) as pool:
            pending = [pool.submit(self._one, epoch, i) for i in batches[0]] if batches else []
            for b in range(len(batches)):
                current = pending
                if b + 1 < len(batches):
                    pending = [pool.submit(self._one, epoch, i) for i in batches[b + 1]]
                yield self._stack([f.result() for f in current])
