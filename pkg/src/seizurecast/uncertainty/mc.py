"""
Monte-Carlo output sampling and the uncertainty level.

A trained BCNN is evaluated n times on the same input, each pass with a
fresh weight draw. Draw i always takes its noise from ``stream(root_seed, i)``,
so the sample list is a function of (model, input, root_seed, n) alone.
Workers each handle a contiguous block of draw indices; results are placed
back by index before any reduction.

Uncertainty level of a distribution with mean m and std s:

    u = s / |m − 0.5|        (+∞ when m == 0.5)

The infinite value is kept in memory and only clipped when exported.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from enum import Enum
from typing import Any, List, Optional, Tuple, Union

import numpy as np

from seizurecast.autodiff import ops
from seizurecast.bayes.network import PREICTAL, BayesianCNN
from seizurecast.core.contracts import ContractError
from seizurecast.core.rng import stream
from seizurecast.core.types import FloatArray
from seizurecast.fusion.bayes_rule import FusionMode, fused_logits

logger = logging.getLogger("seizurecast.uncertainty.mc")

DEFAULT_SAMPLES = 500
EXPORT_CLIP = 10.0


class Decision(str, Enum):
    CONFIDENT_POSITIVE = "confident-positive"
    CONFIDENT_NEGATIVE = "confident-negative"
    UNCERTAIN = "uncertain"


def uncertainty_level(mean: float, std: float) -> float:
    gap = abs(float(mean) - 0.5)
    if gap == 0.0:
        return math.inf
    return float(std) / gap


def clip_uncertainty(u: float, cap: float = EXPORT_CLIP) -> float:
    return min(float(u), float(cap))


def _moments(samples: FloatArray) -> Tuple[float, float]:
    """Mean and population std; identical samples give exactly (x, 0)."""
    if np.all(samples == samples[0]):
        return float(samples[0]), 0.0
    return float(np.mean(samples)), float(np.std(samples))


@dataclass
class PredictionDistribution:
    samples: FloatArray
    mean: float
    std: float
    uncertainty: float

    @classmethod
    def from_samples(cls, samples: Any) -> "PredictionDistribution":
        arr = np.asarray(samples, dtype=np.float64).reshape(-1)
        if arr.size < 2:
            raise ContractError(f"a prediction distribution needs ≥ 2 samples, got {arr.size}")
        mean, std = _moments(arr)
        return cls(samples=arr, mean=mean, std=std, uncertainty=uncertainty_level(mean, std))

    @property
    def n(self) -> int:
        return int(self.samples.size)

    @property
    def uncertainty_clipped(self) -> float:
        return clip_uncertainty(self.uncertainty)


def classify_distribution(
    dist: PredictionDistribution,
    score_threshold: float = 0.5,
    uncertainty_threshold: float = 2.0,
) -> Decision:
    if score_threshold <= 0 or uncertainty_threshold <= 0:
        raise ContractError(
            f"thresholds must be > 0, got score {score_threshold}, "
            f"uncertainty {uncertainty_threshold}"
        )
    if dist.uncertainty >= uncertainty_threshold:
        return Decision.UNCERTAIN
    if dist.mean > score_threshold:
        return Decision.CONFIDENT_POSITIVE
    return Decision.CONFIDENT_NEGATIVE


# ── Sampling ─────────────────────────────────────────────────────────────────


def _chunks(n: int, workers: int) -> List[range]:
    k = max(1, min(int(workers), n))
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [range(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _draw_block(
    model: BayesianCNN,
    x: Any,
    draws: range,
    root_seed: int,
    factors: Optional[FloatArray],
    mode: str,
) -> Tuple[int, FloatArray]:
    out = np.empty((len(draws), x.shape[0]), dtype=np.float64)
    for row, i in enumerate(draws):
        logits = model.predict_logits(x, noise=model.draw_noise(stream(root_seed, i)))
        if factors is not None:
            logits = fused_logits(logits, factors, mode)
        out[row] = ops.softmax_array(logits)[:, PREICTAL]
    return draws.start, out


def _sample_matrix(
    model: BayesianCNN,
    x: Any,
    n: int,
    root_seed: int,
    factors: Optional[FloatArray],
    mode: str,
    workers: int,
) -> FloatArray:
    if n < 2:
        raise ContractError(f"sample_predictions needs n ≥ 2 draws, got {n}")
    batch = np.asarray(x, dtype=np.float64)
    if batch.ndim == 3:
        batch = batch[None]
    f = None
    if factors is not None:
        f = np.broadcast_to(np.asarray(factors, dtype=np.float64), (batch.shape[0],)).copy()
    samples = np.empty((n, batch.shape[0]), dtype=np.float64)
    blocks = _chunks(n, workers)
    if len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            futures = {
                pool.submit(_draw_block, model, batch, r, root_seed, f, mode): r for r in blocks
            }
            for fut in as_completed(futures):
                start, block = fut.result()
                samples[start:start + block.shape[0]] = block
    else:
        _, samples = _draw_block(model, batch, range(n), root_seed, f, mode)
    return samples


def sample_predictions(
    model: BayesianCNN,
    x: Any,
    n: int = DEFAULT_SAMPLES,
    root_seed: int = 0,
    factor: Optional[float] = None,
    mode: Union[FusionMode, str] = FusionMode.LOGIT,
    workers: int = 1,
) -> PredictionDistribution:
    """Distribution of the preictal score of one window (C×F×T or 1×C×F×T)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 4 and arr.shape[0] != 1:
        raise ContractError(f"sample_predictions takes one window, got a batch of {arr.shape[0]}")
    samples = _sample_matrix(model, arr, n, root_seed, factor, FusionMode(mode).value, workers)
    return PredictionDistribution.from_samples(samples[:, 0])


@dataclass
class BatchPrediction:
    """MC samples for many windows; column j belongs to window j."""

    samples: FloatArray           # n_draws × n_windows

    def __len__(self) -> int:
        return int(self.samples.shape[1])

    def distribution(self, j: int) -> PredictionDistribution:
        return PredictionDistribution.from_samples(self.samples[:, j])

    def distributions(self) -> List[PredictionDistribution]:
        return [self.distribution(j) for j in range(len(self))]

    @property
    def means(self) -> FloatArray:
        return np.array([d.mean for d in self.distributions()])


def sample_prediction_batch(
    model: BayesianCNN,
    x: Any,
    n: int = DEFAULT_SAMPLES,
    root_seed: int = 0,
    factors: Optional[FloatArray] = None,
    mode: Union[FusionMode, str] = FusionMode.LOGIT,
    workers: int = 1,
) -> BatchPrediction:
    """Like ``sample_predictions`` for N windows at once; each draw covers the whole batch."""
    samples = _sample_matrix(model, x, n, root_seed, factors, FusionMode(mode).value, workers)
    logger.debug("sampled %d draws for %d windows", n, samples.shape[1])
    return BatchPrediction(samples=samples)
