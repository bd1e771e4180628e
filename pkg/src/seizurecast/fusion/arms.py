"""
The four compared model arms.

  CNN           σ frozen to 0, no priors, deterministic softmax score
  EEG-only      BCNN, no priors
  EEG_ToD       BCNN, time-of-day prior fused
  EEG_ToD_DoW   BCNN, time-of-day and day-of-week priors fused

The order here is the report order.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Dict, List, Optional, Sequence

import numpy as np

from seizurecast.core.contracts import ConfigurationError
from seizurecast.core.types import FloatArray
from seizurecast.fusion.bayes_rule import fusion_factors
from seizurecast.fusion.kde import PriorPair, PriorSet


@dataclass(frozen=True)
class ArmSpec:
    name: str
    bayesian: bool
    use_tod: bool = False
    use_dow: bool = False

    @property
    def fused(self) -> bool:
        return self.use_tod or self.use_dow


ARMS: List[ArmSpec] = [
    ArmSpec("CNN", bayesian=False),
    ArmSpec("EEG-only", bayesian=True),
    ArmSpec("EEG_ToD", bayesian=True, use_tod=True),
    ArmSpec("EEG_ToD_DoW", bayesian=True, use_tod=True, use_dow=True),
]
ARMS_BY_NAME: Dict[str, ArmSpec] = {a.name: a for a in ARMS}


def get_arm(name: str) -> ArmSpec:
    if name not in ARMS_BY_NAME:
        raise ConfigurationError(f"unknown arm {name!r}; valid: {[a.name for a in ARMS]}")
    return ARMS_BY_NAME[name]


def pair_factors(arm: ArmSpec, pair: PriorPair, timestamps: Sequence[datetime]) -> FloatArray:
    return fusion_factors(pair.tod, pair.dow if arm.use_dow else None, timestamps)


def window_factors(
    arm: ArmSpec,
    priors: Optional[PriorSet],
    timestamps: Sequence[datetime],
    patient_ids: Sequence[str],
) -> Optional[FloatArray]:
    """Per-window fusion factors for *arm*, or None when the arm fuses nothing."""
    if not arm.fused:
        return None
    if priors is None:
        raise ConfigurationError(f"arm {arm.name} needs fitted priors (--priors)")
    out = np.empty(len(timestamps), dtype=np.float64)
    groups: Dict[str, List[int]] = {}
    for i, pid in enumerate(patient_ids):
        groups.setdefault(pid, []).append(i)
    for pid, ix in groups.items():
        out[ix] = pair_factors(arm, priors.for_patient(pid), [timestamps[i] for i in ix])
    return out
