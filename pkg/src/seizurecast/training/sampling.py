"""
Class balancing and minibatch order.

Interictal windows outnumber preictal ones by orders of magnitude, so the
minority class is oversampled with replacement before training. Both helpers
return index arrays; callers gather features themselves.
"""

from __future__ import annotations

import logging
import math
from typing import Iterator

import numpy as np

from seizurecast.core.contracts import ContractError, ValidationError
from seizurecast.core.types import IntArray

logger = logging.getLogger("seizurecast.training.sampling")


def balance_classes(labels: np.ndarray, ratio: float, rng: np.random.Generator) -> IntArray:
    """Indices that oversample the minority class to ``ratio`` × majority.

    Every original index is kept. The minority class is topped up to
    ⌈majority · ratio⌉ by drawing extra members with replacement; nothing
    happens when it already has that many. ``ratio <= 0`` disables balancing.
    """
    y = np.asarray(labels).reshape(-1)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise ValidationError(f"balancing needs both classes, got only {classes.tolist()}")
    base = np.arange(y.size, dtype=np.int64)
    if ratio <= 0:
        return base
    minority = classes[int(np.argmin(counts))]
    n_min, n_maj = int(counts.min()), int(counts.max())
    target = math.ceil(n_maj * ratio)
    if n_min >= target:
        return base
    pool = np.flatnonzero(y == minority)
    extra = rng.choice(pool, size=target - n_min, replace=True)
    logger.debug("balanced class %s: %d → %d", minority, n_min, target)
    return np.concatenate([base, extra.astype(np.int64)])


def minibatches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[IntArray]:
    """Shuffled index batches covering ``range(n)`` once; the last may be short."""
    if batch_size < 1:
        raise ContractError(f"batch_size must be ≥ 1, got {batch_size}")
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def num_batches(n: int, batch_size: int) -> int:
    return max(1, math.ceil(n / batch_size))
