"""
Seizure labeling protocol.

Onsets less than ``leading_merge_min`` after the previous onset join that
onset's cluster; the first onset of a cluster is its leading seizure. For
each leading seizure at L the preictal region is [L − (SPH + SOP), L − SPH]
(35 → 5 min by default) and windows are laid on a grid anchored at the
region start. Interictal windows come from a global grid over the whole
recording and must stay at least ``interictal_gap_hours`` from every onset,
leading or not. Everything else is the discarded zone.

All arithmetic is in seconds from the recording start, so the same plan is
produced for a recording and for any copy of it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Dict, List, Optional, Sequence, TypeVar

import numpy as np

from seizurecast.core.config import LabelingConfig, SpectrogramConfig
from seizurecast.core.contracts import ContractError
from seizurecast.data.features import spectrogram
from seizurecast.data.recording import EEGRecording

logger = logging.getLogger("seizurecast.data.labeling")

INTERICTAL = 0
PREICTAL = 1
LABEL_NAMES = {INTERICTAL: "interictal", PREICTAL: "preictal"}
_EPS = 1e-6

T = TypeVar("T", datetime, float)


def _gap_seconds(a: T, b: T) -> float:
    d = b - a
    return d.total_seconds() if isinstance(d, timedelta) else float(d)


def leading_seizures(onsets: Sequence[T], merge_min: float = 30.0) -> List[T]:
    """First onset of every cluster; works on datetimes or on seconds."""
    if not onsets:
        return []
    for a, b in zip(onsets, onsets[1:]):
        if _gap_seconds(a, b) < 0:
            raise ContractError("leading_seizures: onsets must be sorted ascending")
    merge_sec = merge_min * 60.0
    leading = [onsets[0]]
    last = onsets[0]
    for t in onsets[1:]:
        if _gap_seconds(last, t) >= merge_sec:
            leading.append(t)
        last = t
    return leading


# ── Window plans ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class WindowPlan:
    start_sec: float
    label: int


def preictal_starts(leading_sec: float, cfg: LabelingConfig) -> List[float]:
    """Window starts inside one leading seizure's preictal region (recording bounds ignored)."""
    region_start = leading_sec - cfg.preictal_start_before_sec
    span = cfg.sop_min * 60.0
    n = math.floor((span - cfg.window_sec) / cfg.window_step_sec + _EPS) + 1
    return [region_start + k * cfg.window_step_sec for k in range(max(n, 0))]


def plan_windows(
    duration_sec: float,
    onsets_sec: Sequence[float],
    cfg: LabelingConfig,
) -> List[WindowPlan]:
    """Labeled window starts for a recording of *duration_sec* seconds, sorted by start."""
    onsets = list(onsets_sec)
    w = cfg.window_sec
    plans: Dict[float, int] = {}

    for lead in leading_seizures(onsets, cfg.leading_merge_min):
        for s in preictal_starts(lead, cfg):
            if s >= -_EPS and s + w <= duration_sec + _EPS:
                plans[max(s, 0.0)] = PREICTAL

    gap = cfg.interictal_gap_hours * 3600.0
    step = cfg.effective_interictal_step_sec
    sorted_onsets = np.asarray(sorted(onsets), dtype=np.float64)
    n_grid = math.floor((duration_sec - w) / step + _EPS) + 1 if duration_sec >= w else 0
    starts = np.arange(n_grid, dtype=np.float64) * step
    if starts.size:
        lo = np.searchsorted(sorted_onsets, starts - gap, side="right")
        hi = np.searchsorted(sorted_onsets, starts + w + gap, side="left")
        for s in starts[hi == lo]:
            plans.setdefault(float(s), INTERICTAL)

    return [WindowPlan(start_sec=s, label=plans[s]) for s in sorted(plans)]


# ── Labeled windows ──────────────────────────────────────────────────────────


@dataclass
class LabeledWindow:
    features: np.ndarray          # C × F × T spectrogram
    label: int
    window_start: datetime
    patient_id: str
    start_sec: float = 0.0


def label_windows(
    rec: EEGRecording,
    cfg: LabelingConfig,
    spectro_cfg: Optional[SpectrogramConfig] = None,
) -> List[LabeledWindow]:
    """Cut, label and featurize every qualifying window of *rec*."""
    spectro_cfg = spectro_cfg or SpectrogramConfig()
    plans = plan_windows(rec.duration_sec, rec.onset_offsets(), cfg)
    fs = rec.sampling_rate_hz
    windows = [
        LabeledWindow(
            features=spectrogram(rec.segment(p.start_sec, cfg.window_sec), fs, spectro_cfg),
            label=p.label,
            window_start=rec.start_time + timedelta(seconds=p.start_sec),
            patient_id=rec.patient_id,
            start_sec=p.start_sec,
        )
        for p in plans
    ]
    n_pre = sum(1 for w in windows if w.label == PREICTAL)
    logger.debug(
        "%s: %d preictal / %d interictal windows", rec.patient_id, n_pre, len(windows) - n_pre
    )
    return windows
