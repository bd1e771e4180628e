"""
Bayes-rule fusion of event-time priors into the classifier head.

With x the EEG window and d₁, d₂ its time of day and day of week, assuming
x, d₁, d₂ conditionally independent given the seizure variable z:

    p(z | x, d₁, d₂) ∝ p(z | x) · p(d₁ | z) p(d₂ | z) / (p(d₁) p(d₂))

The fusion factor is the ratio on the right evaluated for z = preictal, with
p(d | z) the fitted KDE and p(d) the uniform base density. It is injected
into the final dense layer's pre-softmax output:

  logit        preictal logit × factor  (literal reading, default)
  probability  preictal logit + ln factor, i.e. preictal odds × factor

Only the preictal unit is touched. A factor of exactly 1 leaves the logits
bit-for-bit unchanged in both modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from seizurecast.autodiff import ops
from seizurecast.autodiff.tensor import Tensor
from seizurecast.bayes.network import PREICTAL
from seizurecast.core.contracts import ContractError
from seizurecast.core.types import FloatArray
from seizurecast.fusion.kde import EventTimeSample, PriorDensity


class FusionMode(str, Enum):
    LOGIT = "logit"
    PROBABILITY = "probability"


@dataclass(frozen=True)
class FusionFactor:
    value: float

    def __post_init__(self) -> None:
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ContractError(f"fusion factor must be positive and finite, got {self.value}")


def fusion_factor(
    tod_density: PriorDensity,
    dow_density: Optional[PriorDensity],
    t: datetime,
) -> FusionFactor:
    """[p(d₁|z)/p(d₁)] · [p(d₂|z)/p(d₂)] at *t*; ``dow_density=None`` gives ToD only."""
    sample = EventTimeSample.from_timestamp(t)
    value = tod_density(sample.tod_hours) / tod_density.uniform_base
    if dow_density is not None:
        value *= dow_density(sample.dow_days) / dow_density.uniform_base
    return FusionFactor(value)


def fusion_factors(
    tod_density: PriorDensity,
    dow_density: Optional[PriorDensity],
    timestamps: Sequence[datetime],
) -> FloatArray:
    """Vectorized ``fusion_factor`` over many timestamps."""
    samples = [EventTimeSample.from_timestamp(t) for t in timestamps]
    tod = np.array([s.tod_hours for s in samples], dtype=np.float64)
    value = tod_density.evaluate(tod) / tod_density.uniform_base
    if dow_density is not None:
        dow = np.array([s.dow_days for s in samples], dtype=np.float64)
        value = value * (dow_density.evaluate(dow) / dow_density.uniform_base)
    return value


FactorLike = Union[FusionFactor, float, Sequence[float], FloatArray]


def _factor_array(factor: FactorLike) -> FloatArray:
    raw = factor.value if isinstance(factor, FusionFactor) else factor
    f = np.asarray(raw, dtype=np.float64)
    if f.size and not (np.all(f > 0) and np.all(np.isfinite(f))):
        raise ContractError("fusion factors must be positive and finite")
    return f


def apply_fusion(
    pre_softmax: Tensor,
    factor: FactorLike,
    mode: Union[FusionMode, str] = FusionMode.LOGIT,
) -> Tensor:
    """Fold *factor* (scalar, or one per row of an N×2 batch) into the preictal unit."""
    if pre_softmax.shape[-1] != 2:
        raise ContractError(f"fusion expects a 2-unit output, got shape {pre_softmax.shape}")
    f = _factor_array(factor)
    if FusionMode(mode) is FusionMode.LOGIT:
        return ops.scale_column(pre_softmax, PREICTAL, f)
    return ops.shift_column(pre_softmax, PREICTAL, np.log(f))


def fused_logits(
    logits: FloatArray, factor: FactorLike, mode: Union[FusionMode, str]
) -> FloatArray:
    """Array form of ``apply_fusion`` for inference paths."""
    return apply_fusion(Tensor(logits), factor, mode).data
