"""
Continuous risk timeline over a whole recording.

Windows are laid every ``eval.timeline_step_sec`` from the recording start,
with no regard for labels, so preictal, interictal and discarded-zone
stretches all get a score. Each window gets the full MC distribution; a
σ-frozen checkpoint therefore yields a zero std everywhere.

Next to the CSV a ``<csv>.onsets.json`` sidecar lists every onset and the
leading onsets, for plotting.
"""

from __future__ import annotations

import logging
from datetime import timedelta
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from seizurecast.bayes.network import BayesianCNN
from seizurecast.core.config import Config
from seizurecast.core.contracts import ValidationError
from seizurecast.core.manifest import atomic_write_json
from seizurecast.core.timeutil import format_utc
from seizurecast.data.features import spectrogram
from seizurecast.data.labeling import leading_seizures
from seizurecast.data.recording import EEGRecording
from seizurecast.fusion.arms import ArmSpec, pair_factors
from seizurecast.fusion.kde import PriorSet
from seizurecast.uncertainty.mc import sample_prediction_batch
from seizurecast.uncertainty.timeline import TimelinePoint, write_timeline

logger = logging.getLogger("seizurecast.eval.timeline")

CHUNK_WINDOWS = 256


def timeline_starts(duration_sec: float, window_sec: float, step_sec: float) -> List[float]:
    if duration_sec < window_sec:
        raise ValidationError(
            f"recording of {duration_sec:.0f} s is shorter than one {window_sec:.0f} s window"
        )
    n = int(np.floor((duration_sec - window_sec) / step_sec + 1e-9)) + 1
    return [i * step_sec for i in range(n)]


def build_timeline(
    rec: EEGRecording,
    model: BayesianCNN,
    arm: ArmSpec,
    cfg: Config,
    priors: Optional[PriorSet] = None,
) -> List[TimelinePoint]:
    """MC inference on every timeline window of *rec*."""
    lab = cfg.labeling
    starts = timeline_starts(rec.duration_sec, lab.window_sec, cfg.eval.timeline_step_sec)
    stamps = [rec.start_time + timedelta(seconds=s) for s in starts]
    factors = None
    if arm.fused:
        if priors is None:
            raise ValidationError(f"arm {arm.name} needs fitted priors for the timeline")
        factors = pair_factors(arm, priors.for_patient(rec.patient_id), stamps)

    fs = rec.sampling_rate_hz
    points: List[TimelinePoint] = []
    for lo in range(0, len(starts), CHUNK_WINDOWS):
        hi = min(lo + CHUNK_WINDOWS, len(starts))
        features = np.stack([
            spectrogram(rec.segment(s, lab.window_sec), fs, cfg.spectrogram) for s in starts[lo:hi]
        ])
        batch = sample_prediction_batch(
            model,
            features,
            n=cfg.uncertainty.mc_samples,
            root_seed=cfg.seed,
            factors=factors[lo:hi] if factors is not None else None,
            mode=cfg.fusion.mode,
            workers=cfg.threads,
        )
        for j, dist in enumerate(batch.distributions()):
            points.append(TimelinePoint.from_distribution(
                stamps[lo + j], dist, arm.fused, cfg.uncertainty.export_clip
            ))
    logger.info("%s: %d timeline windows scored with arm %s", rec.patient_id, len(points), arm.name)
    return points


def onsets_sidecar_path(csv_path: Path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".onsets.json")


def write_timeline_outputs(
    points: List[TimelinePoint], rec: EEGRecording, csv_path: Path, merge_min: float
) -> Tuple[Path, Path]:
    """Timeline CSV plus its onset sidecar."""
    out = write_timeline(points, csv_path)
    sidecar = atomic_write_json(onsets_sidecar_path(out), {
        "patient_id": rec.patient_id,
        "onsets": [format_utc(t) for t in rec.seizure_onsets],
        "leading_onsets": [format_utc(t) for t in leading_seizures(rec.seizure_onsets, merge_min)],
    })
    return out, sidecar
