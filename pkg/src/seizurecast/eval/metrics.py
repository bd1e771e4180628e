"""
Evaluation metrics and the evaluation report.

AUC is computed in its Mann–Whitney form: the probability that a random
preictal window outscores a random interictal one, ties counting ½. With
average ranks this equals the trapezoidal area under the ROC curve.

The report keeps one AUC per patient and arm, plus two averages:
  - macro: unweighted mean over evaluated patients (the headline number)
  - weighted: mean weighted by each patient's test-window count
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np
from scipy.stats import rankdata

from seizurecast.core.contracts import MetricError, ValidationError
from seizurecast.core.manifest import atomic_write_json

logger = logging.getLogger("seizurecast.eval.metrics")


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.size != y.size:
        raise MetricError(f"auc: {s.size} scores for {y.size} labels")
    if s.size == 0:
        raise MetricError("auc: no scores")
    if not np.all(np.isin(y, (0, 1))):
        raise MetricError("auc: labels must be 0 or 1")
    pos = y == 1
    n_pos = int(np.sum(pos))
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricError("auc: labels hold a single class")
    if not np.all(np.isfinite(s)):
        raise MetricError("auc: scores contain non-finite values")
    ranks = rankdata(s, method="average")
    u = float(np.sum(ranks[pos])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def macro_average(values: Sequence[float]) -> float:
    if not values:
        raise MetricError("no per-patient values to average")
    return float(np.mean(values))


def weighted_average(values: Sequence[float], weights: Sequence[float]) -> float:
    w = np.asarray(weights, dtype=np.float64)
    if not len(values) or w.sum() <= 0:
        raise MetricError("no weighted per-patient values to average")
    return float(np.dot(np.asarray(values, dtype=np.float64), w) / w.sum())


# ── Report ───────────────────────────────────────────────────────────────────


@dataclass
class EvalReport:
    """Per-arm AUCs across patients, in fixed arm order."""

    arms: List[str] = field(default_factory=list)
    per_patient: Dict[str, Dict[str, float]] = field(default_factory=dict)   # pid → arm → AUC
    window_counts: Dict[str, Dict[str, int]] = field(default_factory=dict)
    skipped: Dict[str, str] = field(default_factory=dict)                   # pid → reason
    macro: Dict[str, float] = field(default_factory=dict)
    weighted: Dict[str, float] = field(default_factory=dict)
    seed: int = 0
    mc_samples: int = 0
    config: Dict[str, Any] = field(default_factory=dict)

    def summarize(self) -> None:
        """Fill ``macro`` and ``weighted`` from ``per_patient``."""
        patients = sorted(self.per_patient)
        if not patients:
            raise MetricError("every patient was skipped; no AUC can be reported")
        weights = [sum(self.window_counts[p].values()) for p in patients]
        self.macro = {}
        self.weighted = {}
        for arm in self.arms:
            values = [self.per_patient[p][arm] for p in patients]
            self.macro[arm] = macro_average(values)
            self.weighted[arm] = weighted_average(values, weights)

    def to_dict(self) -> Dict[str, Any]:
        doc = asdict(self)
        doc["per_patient"] = {
            pid: {arm: self.per_patient[pid][arm] for arm in self.arms}
            for pid in sorted(self.per_patient)
        }
        return doc

    def save(self, path: Path) -> Path:
        out = atomic_write_json(Path(path), self.to_dict())
        logger.info("wrote evaluation report to %s", out)
        return out

    @classmethod
    def load(cls, path: Path) -> "EvalReport":
        p = Path(path)
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
            return cls(**doc)
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ValidationError(f"{p}: not an evaluation report ({exc})") from exc
