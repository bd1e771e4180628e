"""
Window sets and the per-patient train/test split.

Recordings are loaded and featurized in parallel (ThreadPoolExecutor, one
task per recording); results are merged in patient-id order so the window
order never depends on which worker finished first.

Split protocol, per patient: hold out the last k leading seizures. The cut
is the midpoint between the last training leading onset and the first
held-out one; training windows end at or before the cut, test windows start
at or after it, and windows straddling the cut are dropped.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np

from seizurecast.core.config import Config
from seizurecast.core.contracts import ContractValidationResult, ValidationError
from seizurecast.data.labeling import PREICTAL, label_windows, leading_seizures
from seizurecast.data.recording import EEGRecording, load_recording

logger = logging.getLogger("seizurecast.data.dataset")


@dataclass
class WindowSet:
    """Stacked labeled windows; row i of every field describes window i."""

    features: np.ndarray                    # N × C × F × T
    labels: np.ndarray                      # N, 0 interictal / 1 preictal
    window_starts: List[datetime] = field(default_factory=list)
    patient_ids: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return tuple(int(d) for d in self.features.shape[1:])  # type: ignore[return-value]

    def class_counts(self) -> Dict[str, int]:
        n_pre = int(np.sum(self.labels == PREICTAL))
        return {"preictal": n_pre, "interictal": len(self) - n_pre}

    def subset(self, idx: Sequence[int] | np.ndarray) -> "WindowSet":
        ix = np.asarray(idx, dtype=np.int64)
        return WindowSet(
            features=self.features[ix],
            labels=self.labels[ix],
            window_starts=[self.window_starts[i] for i in ix],
            patient_ids=[self.patient_ids[i] for i in ix],
        )

    def by_patient(self) -> Dict[str, "WindowSet"]:
        groups: Dict[str, List[int]] = {}
        for i, pid in enumerate(self.patient_ids):
            groups.setdefault(pid, []).append(i)
        return {pid: self.subset(ix) for pid, ix in sorted(groups.items())}

    def validate(self) -> ContractValidationResult:
        result = ContractValidationResult()
        n = len(self)
        sizes = {self.features.shape[0], len(self.window_starts), len(self.patient_ids)}
        if sizes != {n}:
            result.violate("window set fields disagree on the number of windows")
        if n and not np.all(np.isfinite(self.features)):
            result.violate("window features contain non-finite values")
        if n and len(np.unique(self.labels)) < 2:
            result.warn("window set holds a single class")
        return result

    @classmethod
    def empty(cls) -> "WindowSet":
        return cls(features=np.zeros((0, 0, 0, 0)), labels=np.zeros(0, dtype=np.int64))

    @classmethod
    def concat(cls, parts: Sequence["WindowSet"]) -> "WindowSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        shapes = {p.input_shape for p in parts}
        if len(shapes) > 1:
            raise ValidationError(
                f"window feature shapes differ across recordings: {sorted(shapes)}"
            )
        return cls(
            features=np.concatenate([p.features for p in parts]),
            labels=np.concatenate([p.labels for p in parts]),
            window_starts=[t for p in parts for t in p.window_starts],
            patient_ids=[pid for p in parts for pid in p.patient_ids],
        )


@dataclass
class PatientData:
    """Featurized windows of one recording, plus what the split needs."""

    patient_id: str
    windows: WindowSet
    onsets: List[datetime]
    start_time: datetime
    duration_sec: float


def featurize_recording(rec: EEGRecording, cfg: Config) -> PatientData:
    labeled = label_windows(rec, cfg.labeling, cfg.spectrogram)
    if labeled:
        windows = WindowSet(
            features=np.stack([w.features for w in labeled]),
            labels=np.array([w.label for w in labeled], dtype=np.int64),
            window_starts=[w.window_start for w in labeled],
            patient_ids=[w.patient_id for w in labeled],
        )
    else:
        logger.warning("%s: no labeled windows", rec.patient_id)
        windows = WindowSet.empty()
    return PatientData(
        rec.patient_id, windows, list(rec.seizure_onsets), rec.start_time, rec.duration_sec
    )


def build_windows(recordings: Sequence[EEGRecording], cfg: Config) -> List[PatientData]:
    """Featurize in-memory recordings, one worker per recording up to ``cfg.threads``."""
    return _fan_out(list(recordings), lambda rec: featurize_recording(rec, cfg), cfg.threads)


def load_patients(paths: Sequence[Path], cfg: Config) -> List[PatientData]:
    """Load and featurize recordings from metadata paths; raw signals are released per patient."""
    return _fan_out(list(paths), lambda p: featurize_recording(load_recording(p), cfg), cfg.threads)


def _fan_out(
    items: Sequence[Any], fn: Callable[[Any], PatientData], threads: int
) -> List[PatientData]:
    results: List[PatientData] = []
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=min(len(items), threads)) as pool:
            futures = {pool.submit(fn, item): item for item in items}
            for fut in as_completed(futures):
                results.append(fut.result())
    else:
        results = [fn(item) for item in items]
    results.sort(key=lambda pd: pd.patient_id)
    ids = [pd.patient_id for pd in results]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate patient ids in dataset: {ids}")
    return results


# ── Split ────────────────────────────────────────────────────────────────────


@dataclass
class DatasetSplit:
    train: WindowSet
    test: WindowSet
    train_onsets: Dict[str, List[datetime]]        # leading onsets before the cut
    cuts: Dict[str, datetime]


def split_cut(
    onsets: Sequence[datetime], holdout: int, merge_min: float
) -> Tuple[datetime, List[datetime]]:
    """Cut time and the training leading onsets for one patient."""
    leading = leading_seizures(list(onsets), merge_min)
    if len(leading) < holdout + 1:
        raise ValidationError(
            f"need at least {holdout + 1} leading seizures to hold out {holdout}, "
            f"found {len(leading)}"
        )
    before, after = leading[-holdout - 1], leading[-holdout]
    return before + (after - before) / 2, leading[:-holdout]


def split_patient(
    pd: PatientData, holdout: int, cfg: Config
) -> Tuple[WindowSet, WindowSet, List[datetime], datetime]:
    try:
        cut, train_leading = split_cut(pd.onsets, holdout, cfg.labeling.leading_merge_min)
    except ValidationError as exc:
        raise ValidationError(f"{pd.patient_id}: {exc}") from exc
    w = timedelta(seconds=cfg.labeling.window_sec)
    starts = pd.windows.window_starts
    train_ix = [i for i, s in enumerate(starts) if s + w <= cut]
    test_ix = [i for i, s in enumerate(starts) if s >= cut]
    return pd.windows.subset(train_ix), pd.windows.subset(test_ix), train_leading, cut


def split_dataset(patients: Sequence[PatientData], cfg: Config) -> DatasetSplit:
    """Leave-last-k-leading-seizures-out over every patient, k = ``train.holdout_seizures``."""
    k = cfg.train.holdout_seizures
    trains: List[WindowSet] = []
    tests: List[WindowSet] = []
    onsets: Dict[str, List[datetime]] = {}
    cuts: Dict[str, datetime] = {}
    for pd in patients:
        tr, te, lead, cut = split_patient(pd, k, cfg)
        trains.append(tr)
        tests.append(te)
        onsets[pd.patient_id] = lead
        cuts[pd.patient_id] = cut
        logger.info(
            "%s: cut at %s, train %s, test %s", pd.patient_id, cut.isoformat(),
            tr.class_counts(), te.class_counts(),
        )
    return DatasetSplit(WindowSet.concat(trains), WindowSet.concat(tests), onsets, cuts)
