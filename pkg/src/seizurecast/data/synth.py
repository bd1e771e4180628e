"""
Synthetic EEG generator.

Stands in for a clinical dataset. For every patient:

  1. Leading seizure onsets are drawn by rejection sampling so their time of
     day follows a von Mises bump around ``circadian_peak_hour`` (and,
     optionally, their weekday another bump), with at least
     ``min_spacing_min`` between a cluster's last seizure and the next
     leading onset.
  2. Each leading seizure may get follow-up seizures a few minutes later,
     inside the merge window, so the leading-seizure rule has clusters to
     collapse.
  3. The background is pink (1/f) noise per channel. Before every leading
     onset a 4–8 Hz component ramps in linearly over ``ramp_min`` minutes;
     its amplitude scales with ``separability`` (0 plants nothing).

Patients start on consecutive days (``stagger_days``) so day-of-week varies
across the cohort. Every draw comes from ``purpose_stream(seed, SYNTH, …)``,
so a (spec, seed) pair always yields identical recordings.
"""

from __future__ import annotations

import json
import logging
import math
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterator, List, Optional

import numpy as np
from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError
from scipy import fft as sp_fft
from scipy.signal import butter, sosfiltfilt

from seizurecast.core.contracts import GenerationError
from seizurecast.core.rng import Purpose, purpose_stream
from seizurecast.core.timeutil import parse_utc
from seizurecast.data.labeling import leading_seizures
from seizurecast.data.recording import EEGRecording

logger = logging.getLogger("seizurecast.data.synth")

_MAX_ATTEMPTS = 5000
_MAX_BATCHES = 10_000
_THETA_GAIN = 2.0          # peak theta std relative to the background at separability 1
_MAX_FOLLOWUPS = 3


class SyntheticSpec(BaseModel):
    """JSON-serializable generator settings."""

    n_patients: int = Field(10, ge=1)
    hours: float = Field(24.0, gt=0)
    sampling_rate_hz: float = Field(32.0, gt=0)
    n_channels: int = Field(4, ge=1)
    seizures_per_day: float = Field(3.0, ge=0)

    circadian_peak_hour: float = Field(8.0, ge=0, lt=24)
    circadian_concentration: float = Field(4.0, ge=0)      # von Mises κ; 0 = uniform
    weekday_peak: Optional[float] = Field(None, ge=0, lt=7)
    weekday_concentration: float = Field(0.0, ge=0)

    followup_probability: float = Field(0.3, ge=0, le=1)
    followup_max_min: float = Field(20.0, gt=0)
    merge_min: float = Field(30.0, gt=0)
    min_spacing_min: float = Field(65.0, gt=0)
    lead_margin_min: float = Field(45.0, ge=0)              # no onset earlier than this
    tail_margin_min: float = Field(10.0, ge=0)              # nor later than end − this

    separability: float = Field(0.5, ge=0, le=1)
    ramp_min: float = Field(40.0, gt=0)
    theta_low_hz: float = Field(4.0, gt=0)
    theta_high_hz: float = Field(8.0, gt=0)
    noise_amplitude: float = Field(10.0, gt=0)

    start_time: str = "2024-01-01T00:00:00Z"
    stagger_days: float = 1.0
    seed: Optional[int] = None

    @property
    def leading_per_patient(self) -> int:
        return int(round(self.seizures_per_day * self.hours / 24.0))


def load_synth_spec(path: Path) -> SyntheticSpec:
    p = Path(path)
    try:
        return SyntheticSpec.model_validate(json.loads(p.read_text(encoding="utf-8")))
    except FileNotFoundError as exc:
        raise GenerationError(f"synthetic spec not found: {p}") from exc
    except (json.JSONDecodeError, PydanticValidationError) as exc:
        raise GenerationError(f"{p}: bad synthetic spec: {exc}") from exc


def check_feasible(spec: SyntheticSpec) -> None:
    """Raise GenerationError when *spec* cannot be realized."""
    problems: List[str] = []
    if spec.followup_max_min >= spec.merge_min:
        problems.append("followup_max_min must be shorter than merge_min")
    if spec.min_spacing_min < spec.merge_min:
        problems.append("min_spacing_min must be at least merge_min")
    if spec.theta_low_hz >= spec.theta_high_hz:
        problems.append("theta_low_hz must be below theta_high_hz")
    if spec.theta_high_hz >= spec.sampling_rate_hz / 2.0:
        problems.append("theta band must lie below Nyquist")
    span_min = spec.hours * 60.0 - spec.lead_margin_min - spec.tail_margin_min
    n = spec.leading_per_patient
    needed = max(0, n - 1) * (spec.min_spacing_min + spec.followup_max_min)
    if n > 0 and span_min < needed:
        problems.append(
            f"{n} leading seizures need {needed:.0f} min but only "
            f"{max(span_min, 0):.0f} min are usable "
            "(seizures are denser than the merge rule allows)"
        )
    if problems:
        raise GenerationError("infeasible synthetic spec: " + "; ".join(problems))


# ── Onsets ───────────────────────────────────────────────────────────────────


def _acceptance(spec: SyntheticSpec, start: datetime, offsets_sec: np.ndarray) -> np.ndarray:
    """Unnormalized von Mises weights in (0, 1] for candidate onset offsets."""
    stamps = [start + timedelta(seconds=float(s)) for s in offsets_sec]
    tod = np.array([t.hour + t.minute / 60.0 + t.second / 3600.0 for t in stamps])
    theta = 2.0 * math.pi * (tod - spec.circadian_peak_hour) / 24.0
    weight = np.exp(spec.circadian_concentration * (np.cos(theta) - 1.0))
    if spec.weekday_peak is not None and spec.weekday_concentration > 0:
        dow = np.array([t.weekday() for t in stamps]) + tod / 24.0
        phi = 2.0 * math.pi * (dow - spec.weekday_peak) / 7.0
        weight = weight * np.exp(spec.weekday_concentration * (np.cos(phi) - 1.0))
    return weight


def _draw_leading(
    spec: SyntheticSpec, start: datetime, rng: np.random.Generator, n: int
) -> np.ndarray:
    lo = spec.lead_margin_min * 60.0
    hi = spec.hours * 3600.0 - spec.tail_margin_min * 60.0
    picked: List[float] = []
    for _ in range(_MAX_BATCHES):
        if len(picked) >= n:
            break
        batch = rng.uniform(lo, hi, size=256)
        keep = batch[rng.uniform(size=batch.size) < _acceptance(spec, start, batch)]
        picked.extend(float(x) for x in keep)
    if len(picked) < n:
        raise GenerationError("circadian weights leave no usable onset times in the recording")
    return np.sort(np.asarray(picked[:n]))


def draw_onsets(spec: SyntheticSpec, start: datetime, rng: np.random.Generator) -> List[float]:
    """All onsets (leading and follow-ups) in seconds from *start*, sorted."""
    n = spec.leading_per_patient
    if n == 0:
        return []
    end_limit = spec.hours * 3600.0 - spec.tail_margin_min * 60.0
    spacing = spec.min_spacing_min * 60.0
    for _ in range(_MAX_ATTEMPTS):
        leading = _draw_leading(spec, start, rng, n)
        onsets: List[float] = []
        ok = True
        for lead in leading:
            if onsets and lead - onsets[-1] < spacing:
                ok = False
                break
            onsets.append(float(lead))
            t = float(lead)
            for _k in range(_MAX_FOLLOWUPS):
                if rng.uniform() >= spec.followup_probability:
                    break
                t = t + rng.uniform(1.0, spec.followup_max_min) * 60.0
                if t > end_limit:
                    break
                onsets.append(t)
        if ok:
            return onsets
    raise GenerationError(
        f"could not place {n} seizures {spec.min_spacing_min:g} min apart "
        f"after {_MAX_ATTEMPTS} attempts; "
        "lower the seizure rate or the circadian concentration"
    )


# ── Signal ───────────────────────────────────────────────────────────────────


def pink_noise(n_channels: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance 1/f noise, one row per channel."""
    white = rng.standard_normal((n_channels, n_samples))
    spectrum = sp_fft.rfft(white, axis=-1)
    scale = np.zeros(spectrum.shape[-1])
    scale[1:] = 1.0 / np.sqrt(np.arange(1, scale.size))
    pink = sp_fft.irfft(spectrum * scale, n=n_samples, axis=-1)
    pink -= pink.mean(axis=-1, keepdims=True)
    std = pink.std(axis=-1, keepdims=True)
    return pink / np.where(std > 0, std, 1.0)


def theta_noise(spec: SyntheticSpec, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    white = rng.standard_normal((spec.n_channels, n_samples))
    sos = butter(4, [spec.theta_low_hz, spec.theta_high_hz], btype="bandpass",
                 fs=spec.sampling_rate_hz, output="sos")
    band = sosfiltfilt(sos, white, axis=-1)
    std = band.std(axis=-1, keepdims=True)
    return band / np.where(std > 0, std, 1.0)


def preictal_envelope(spec: SyntheticSpec, n_samples: int, leading_sec: List[float]) -> np.ndarray:
    """0 → 1 linear ramp over the ``ramp_min`` minutes before each leading onset."""
    t = np.arange(n_samples) / spec.sampling_rate_hz
    env = np.zeros(n_samples)
    ramp = spec.ramp_min * 60.0
    for lead in leading_sec:
        inside = (t >= lead - ramp) & (t < lead)
        env[inside] = np.maximum(env[inside], (t[inside] - (lead - ramp)) / ramp)
    return env


def synthesize_patient(spec: SyntheticSpec, index: int, seed: int) -> EEGRecording:
    start = parse_utc(spec.start_time) + timedelta(days=spec.stagger_days * index)
    n_samples = int(round(spec.hours * 3600.0 * spec.sampling_rate_hz))
    onsets = draw_onsets(spec, start, purpose_stream(seed, Purpose.SYNTH, index, 0))
    signal = pink_noise(spec.n_channels, n_samples, purpose_stream(seed, Purpose.SYNTH, index, 1))
    if spec.separability > 0 and onsets:
        env = preictal_envelope(spec, n_samples, leading_seizures(onsets, spec.merge_min))
        theta = theta_noise(spec, n_samples, purpose_stream(seed, Purpose.SYNTH, index, 2))
        signal = signal + (_THETA_GAIN * spec.separability) * env[None, :] * theta
    channels = (spec.noise_amplitude * signal).astype(np.float32)
    return EEGRecording(
        patient_id=f"pat{index + 1:02d}",
        channels=channels,
        start_time=start,
        sampling_rate_hz=spec.sampling_rate_hz,
        seizure_onsets=[start + timedelta(seconds=s) for s in onsets],
    )


def iter_synthetic(spec: SyntheticSpec, seed: Optional[int] = None) -> Iterator[EEGRecording]:
    """Yield one recording per patient; nothing is held beyond the current patient."""
    check_feasible(spec)
    root = seed if seed is not None else (spec.seed or 0)
    for i in range(spec.n_patients):
        rec = synthesize_patient(spec, i, root)
        logger.info(
            "synthesized %s: %.1f h, %d onsets", rec.patient_id, rec.duration_sec / 3600.0,
            len(rec.seizure_onsets),
        )
        yield rec


def synthesize_dataset(spec: SyntheticSpec, seed: Optional[int] = None) -> List[EEGRecording]:
    return list(iter_synthetic(spec, seed))
