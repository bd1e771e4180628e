"""
EEG recordings and their on-disk container.

A recording is stored as two sibling files:

  <patient_id>.json   RecordingMeta (UTC timestamps with a Z suffix)
  <patient_id>.f32    little-endian float32 samples, frame-major with
                      channels interleaved (s0c0 s0c1 … s1c0 s1c1 …)
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import List

import numpy as np
from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError

from seizurecast.core.contracts import ContractValidationResult, ValidationError
from seizurecast.core.manifest import atomic_write_bytes, atomic_write_text, dump_json
from seizurecast.core.timeutil import ensure_utc, format_utc, offsets_from, parse_utc

logger = logging.getLogger("seizurecast.data.recording")

RECORDING_FORMAT_VERSION = 1
DEFAULT_SAMPLING_RATE_HZ = 256.0
DEFAULT_CHANNELS = 19
META_SUFFIX = ".json"
DATA_SUFFIX = ".f32"


@dataclass
class EEGRecording:
    patient_id: str
    channels: np.ndarray                     # n_channels × n_samples, float32
    start_time: datetime
    sampling_rate_hz: float = DEFAULT_SAMPLING_RATE_HZ
    seizure_onsets: List[datetime] = field(default_factory=list)
    channel_names: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.channels = np.asarray(self.channels, dtype=np.float32)
        if self.channels.ndim != 2:
            raise ValidationError(
                f"{self.patient_id}: channels must be 2-D, got {self.channels.shape}"
            )
        self.start_time = ensure_utc(self.start_time)
        self.seizure_onsets = [ensure_utc(t) for t in self.seizure_onsets]
        if not self.channel_names:
            self.channel_names = [f"ch{i:02d}" for i in range(self.n_channels)]
        self.validate().raise_for_violations(self.patient_id)

    @property
    def n_channels(self) -> int:
        return int(self.channels.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.channels.shape[1])

    @property
    def duration_sec(self) -> float:
        return self.n_samples / self.sampling_rate_hz

    def onset_offsets(self) -> List[float]:
        """Onsets as seconds from ``start_time``."""
        return offsets_from(self.start_time, self.seizure_onsets)

    def segment(self, start_sec: float, length_sec: float) -> np.ndarray:
        """Samples of [start, start + length) as a float64 C×n array."""
        i0 = int(round(start_sec * self.sampling_rate_hz))
        n = int(round(length_sec * self.sampling_rate_hz))
        return self.channels[:, i0:i0 + n].astype(np.float64)

    def validate(self) -> ContractValidationResult:
        result = ContractValidationResult()
        if not self.sampling_rate_hz > 0:
            result.violate(f"sampling rate must be > 0, got {self.sampling_rate_hz}")
            return result
        if len(self.channel_names) != self.n_channels:
            result.violate(
                f"{len(self.channel_names)} channel names for {self.n_channels} channels"
            )
        offsets = self.onset_offsets()
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            result.violate("seizure onsets must be strictly increasing")
        if offsets and (offsets[0] < 0 or offsets[-1] > self.duration_sec):
            result.violate("seizure onsets must lie within the recording")
        if self.n_samples == 0:
            result.warn("recording is empty")
        return result


# ── Container format ─────────────────────────────────────────────────────────


class RecordingMeta(BaseModel):
    format_version: int = RECORDING_FORMAT_VERSION
    patient_id: str
    start_time: str
    sampling_rate_hz: float
    channel_names: List[str]
    n_samples: int
    seizure_onsets: List[str] = Field(default_factory=list)
    data_file: str


def save_recording(rec: EEGRecording, directory: Path) -> Path:
    """Write ``<patient_id>.json`` and ``<patient_id>.f32`` into *directory*.

    Returns the JSON path.
    """
    d = Path(directory)
    data_name = rec.patient_id + DATA_SUFFIX
    payload = np.ascontiguousarray(rec.channels.T, dtype="<f4").tobytes()
    atomic_write_bytes(d / data_name, payload)
    meta = RecordingMeta(
        patient_id=rec.patient_id,
        start_time=format_utc(rec.start_time),
        sampling_rate_hz=rec.sampling_rate_hz,
        channel_names=list(rec.channel_names),
        n_samples=rec.n_samples,
        seizure_onsets=[format_utc(t) for t in rec.seizure_onsets],
        data_file=data_name,
    )
    meta_path = atomic_write_text(
        d / (rec.patient_id + META_SUFFIX), dump_json(meta.model_dump(mode="json"))
    )
    logger.debug(
        "wrote recording %s (%d ch × %d samples)", rec.patient_id, rec.n_channels, rec.n_samples
    )
    return meta_path


def read_meta(path: Path) -> RecordingMeta:
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
        meta = RecordingMeta.model_validate(doc)
    except FileNotFoundError as exc:
        raise ValidationError(f"recording metadata not found: {p}") from exc
    except (json.JSONDecodeError, PydanticValidationError) as exc:
        raise ValidationError(f"{p}: bad recording metadata: {exc}") from exc
    if meta.format_version != RECORDING_FORMAT_VERSION:
        raise ValidationError(f"{p}: recording format {meta.format_version} unsupported")
    return meta


def load_recording(path: Path) -> EEGRecording:
    """Load a recording from its JSON metadata path."""
    p = Path(path)
    meta = read_meta(p)
    data_path = p.parent / meta.data_file
    if not data_path.is_file():
        raise ValidationError(f"{p}: data file {data_path.name} is missing")
    raw = np.fromfile(data_path, dtype="<f4")
    n_ch = len(meta.channel_names)
    if raw.size != n_ch * meta.n_samples:
        raise ValidationError(
            f"{data_path}: {raw.size} values, expected {n_ch} × {meta.n_samples}"
        )
    channels = raw.reshape(meta.n_samples, n_ch).T.astype(np.float32)
    return EEGRecording(
        patient_id=meta.patient_id,
        channels=channels,
        start_time=parse_utc(meta.start_time),
        sampling_rate_hz=meta.sampling_rate_hz,
        seizure_onsets=[parse_utc(s) for s in meta.seizure_onsets],
        channel_names=list(meta.channel_names),
    )


def list_recordings(directory: Path) -> List[Path]:
    """Metadata files of every recording in *directory*, sorted by file name."""
    d = Path(directory)
    if not d.is_dir():
        raise ValidationError(f"dataset directory not found: {d}")
    paths = sorted(
        p for p in d.glob("*" + META_SUFFIX)
        if not p.name.endswith(".manifest.json") and p.with_suffix(DATA_SUFFIX).is_file()
    )
    if not paths:
        raise ValidationError(f"no recordings in {d}")
    return paths
