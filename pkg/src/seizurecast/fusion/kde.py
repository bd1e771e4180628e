"""
Event-time priors.

Seizure onsets are reduced to two periodic variables, time of day (hours in
[0, 24)) and day of week (days in [0, 7), Monday = 0, fractional). Each is
modelled by a Gaussian KDE. In circular mode every kernel is replicated at
±period so mass leaking over midnight (or Sunday night) wraps around; in
both modes the density is renormalized analytically over [0, period), so it
integrates to one on the period.

A PriorSet bundles the pooled ToD/DoW densities and, optionally, one pair
per patient. It is what ``fit-priors`` writes and what evaluation reads.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError
from scipy.stats import norm

from seizurecast.core.contracts import FitError, ValidationError
from seizurecast.core.manifest import atomic_write_json
from seizurecast.core.timeutil import ensure_utc
from seizurecast.core.types import FloatArray

logger = logging.getLogger("seizurecast.fusion.kde")

TABLE_POINTS = 1024
PRIORS_FORMAT_VERSION = 1
_EVAL_BUDGET = 2_000_000      # kernel evaluations per chunk
_FLOOR = 1e-300               # kernels underflow far from every sample


class Variable(str, Enum):
    TOD = "tod"
    DOW = "dow"

    @property
    def period(self) -> float:
        return 24.0 if self is Variable.TOD else 7.0


@dataclass(frozen=True)
class EventTimeSample:
    tod_hours: float
    dow_days: float

    @classmethod
    def from_timestamp(cls, ts: datetime) -> "EventTimeSample":
        t = ensure_utc(ts)
        tod = t.hour + t.minute / 60.0 + t.second / 3600.0 + t.microsecond / 3.6e9
        return cls(tod_hours=tod, dow_days=t.weekday() + tod / 24.0)

    def value(self, variable: Variable) -> float:
        return self.tod_hours if variable is Variable.TOD else self.dow_days


SampleLike = Union[EventTimeSample, float]


# ── Density ──────────────────────────────────────────────────────────────────


class PriorDensity:
    """Fitted (or uniform) density of one periodic variable."""

    def __init__(
        self,
        variable: Variable,
        samples: Sequence[float],
        bandwidth: float,
        circular: bool = True,
        uniform: bool = False,
    ) -> None:
        self.variable = Variable(variable)
        self.period = self.variable.period
        self.samples = np.asarray(samples, dtype=np.float64) % self.period
        self.bandwidth = float(bandwidth)
        self.circular = circular
        self.is_uniform = uniform
        self.uniform_base = 1.0 / self.period
        self._offsets = np.array([-self.period, 0.0, self.period]) if circular else np.array([0.0])
        self._norm = 1.0 if uniform else self._mass()

    @classmethod
    def uniform(cls, variable: Variable) -> "PriorDensity":
        v = Variable(variable)
        return cls(v, [], bandwidth=v.period, uniform=True)

    def _centres(self) -> FloatArray:
        return (self.samples[:, None] + self._offsets[None, :]).reshape(-1)

    def _mass(self) -> float:
        c = self._centres()
        h = self.bandwidth
        mass = norm.cdf((self.period - c) / h) - norm.cdf(-c / h)
        return float(mass.sum() / self.samples.size)

    def evaluate(self, t: Union[float, Sequence[float], FloatArray]) -> FloatArray:
        """Density at *t* (wrapped into [0, period)); returns an array shaped like *t*."""
        pts = np.asarray(t, dtype=np.float64)
        if self.is_uniform:
            return np.full(pts.shape, self.uniform_base)
        flat = (pts.reshape(-1) % self.period)
        centres = self._centres()
        out = np.empty_like(flat)
        step = max(1, _EVAL_BUDGET // max(1, centres.size))
        h = self.bandwidth
        for start in range(0, flat.size, step):
            chunk = flat[start:start + step]
            z = (chunk[:, None] - centres[None, :]) / h
            out[start:start + step] = norm.pdf(z).sum(axis=1) / (h * self.samples.size)
        return np.maximum(out / self._norm, _FLOOR).reshape(pts.shape)

    def __call__(self, t: float) -> float:
        return float(self.evaluate(t))

    def grid(self, points: int = TABLE_POINTS) -> FloatArray:
        return np.arange(points, dtype=np.float64) * (self.period / points)

    def tabulate(self, points: int = TABLE_POINTS) -> FloatArray:
        return self.evaluate(self.grid(points))

    def mode(self, points: int = TABLE_POINTS) -> float:
        g = self.grid(points)
        return float(g[int(np.argmax(self.evaluate(g)))])

    # ── Export ────────────────────────────────────────────────────────────

    def to_doc(self) -> "DensityDoc":
        return DensityDoc(
            variable=self.variable.value,
            period=self.period,
            bandwidth=self.bandwidth,
            circular=self.circular,
            uniform=self.is_uniform,
            samples=[float(s) for s in self.samples],
            grid=[float(g) for g in self.grid()],
            density=[float(d) for d in self.tabulate()],
        )

    @classmethod
    def from_doc(cls, doc: "DensityDoc") -> "PriorDensity":
        if doc.uniform:
            return cls.uniform(Variable(doc.variable))
        return cls(Variable(doc.variable), doc.samples, doc.bandwidth, circular=doc.circular)


def scott_bandwidth(values: FloatArray) -> Optional[float]:
    """n^(-1/5) · sample std, or None when the spread is zero or undefined."""
    if values.size < 2:
        return None
    std = float(np.std(values, ddof=1))
    if std == 0.0 or not math.isfinite(std):
        return None
    return std * values.size ** (-0.2)


def fit_kde(
    samples: Sequence[SampleLike],
    variable: Variable,
    bandwidth: Optional[float] = None,
    circular: bool = True,
) -> PriorDensity:
    """Gaussian KDE over *samples*; Scott's rule unless *bandwidth* is given."""
    variable = Variable(variable)
    values = np.array(
        [s.value(variable) if isinstance(s, EventTimeSample) else float(s) for s in samples],
        dtype=np.float64,
    )
    if values.size == 0:
        raise FitError(f"cannot fit a {variable.value} prior without samples")
    if bandwidth is None:
        bandwidth = scott_bandwidth(values)
        if bandwidth is None:
            bandwidth = variable.period / 20.0
            logger.warning(
                "%s prior: zero sample variance over %d sample(s), bandwidth falls back to %.3g",
                variable.value, values.size, bandwidth,
            )
    elif bandwidth <= 0:
        raise FitError(f"bandwidth must be > 0, got {bandwidth}")
    return PriorDensity(variable, values, bandwidth, circular=circular)


# ── Prior sets ───────────────────────────────────────────────────────────────


class DensityDoc(BaseModel):
    variable: str
    period: float
    bandwidth: float
    circular: bool = True
    uniform: bool = False
    samples: List[float] = Field(default_factory=list)
    grid: List[float] = Field(default_factory=list)
    density: List[float] = Field(default_factory=list)


class PairDoc(BaseModel):
    tod: DensityDoc
    dow: DensityDoc


class PriorSetDoc(BaseModel):
    format_version: int = PRIORS_FORMAT_VERSION
    scope: str = "pooled"
    pooled: PairDoc
    per_patient: Dict[str, PairDoc] = Field(default_factory=dict)


@dataclass
class PriorPair:
    tod: PriorDensity
    dow: PriorDensity

    @classmethod
    def uniform(cls) -> "PriorPair":
        return cls(PriorDensity.uniform(Variable.TOD), PriorDensity.uniform(Variable.DOW))

    def to_doc(self) -> PairDoc:
        return PairDoc(tod=self.tod.to_doc(), dow=self.dow.to_doc())

    @classmethod
    def from_doc(cls, doc: PairDoc) -> "PriorPair":
        return cls(PriorDensity.from_doc(doc.tod), PriorDensity.from_doc(doc.dow))


def fit_pair(
    onsets: Sequence[datetime],
    circular: bool = True,
    tod_bandwidth: Optional[float] = None,
    dow_bandwidth: Optional[float] = None,
) -> PriorPair:
    samples = [EventTimeSample.from_timestamp(t) for t in onsets]
    return PriorPair(
        tod=fit_kde(samples, Variable.TOD, tod_bandwidth, circular),
        dow=fit_kde(samples, Variable.DOW, dow_bandwidth, circular),
    )


@dataclass
class PriorSet:
    pooled: PriorPair
    per_patient: Dict[str, PriorPair]
    scope: str = "pooled"

    def for_patient(self, patient_id: str) -> PriorPair:
        if self.scope == "per-patient":
            if patient_id not in self.per_patient:
                raise ValidationError(f"no per-patient prior for {patient_id!r}")
            return self.per_patient[patient_id]
        return self.pooled

    def to_doc(self) -> PriorSetDoc:
        return PriorSetDoc(
            scope=self.scope,
            pooled=self.pooled.to_doc(),
            per_patient={pid: pair.to_doc() for pid, pair in sorted(self.per_patient.items())},
        )

    def save(self, path: Path) -> Path:
        return atomic_write_json(path, self.to_doc().model_dump(mode="json"))

    @classmethod
    def load(cls, path: Path) -> "PriorSet":
        p = Path(path)
        if not p.is_file():
            raise ValidationError(f"priors file not found: {p}")
        try:
            doc = PriorSetDoc.model_validate(json.loads(p.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, PydanticValidationError) as exc:
            raise ValidationError(f"{p}: bad priors file: {exc}") from exc
        if doc.format_version != PRIORS_FORMAT_VERSION:
            raise ValidationError(f"{p}: priors format {doc.format_version} unsupported")
        return cls(
            pooled=PriorPair.from_doc(doc.pooled),
            per_patient={pid: PriorPair.from_doc(d) for pid, d in doc.per_patient.items()},
            scope=doc.scope,
        )


def fit_prior_set(
    onsets_by_patient: Dict[str, Sequence[datetime]],
    scope: str = "pooled",
    circular: bool = True,
    tod_bandwidth: Optional[float] = None,
    dow_bandwidth: Optional[float] = None,
) -> PriorSet:
    """Pooled priors over every patient's onsets, plus per-patient priors.

    Per-patient densities are fitted for every patient with at least one onset
    regardless of *scope*; *scope* decides which pair ``for_patient`` hands out.
    """
    pooled_onsets = [t for pid in sorted(onsets_by_patient) for t in onsets_by_patient[pid]]
    pooled = fit_pair(pooled_onsets, circular, tod_bandwidth, dow_bandwidth)
    per_patient = {
        pid: fit_pair(onsets, circular, tod_bandwidth, dow_bandwidth)
        for pid, onsets in sorted(onsets_by_patient.items())
        if len(onsets) > 0
    }
    logger.info(
        "fitted priors on %d onsets from %d patients (ToD bandwidth %.3g h, DoW bandwidth %.3g d)",
        len(pooled_onsets), len(onsets_by_patient), pooled.tod.bandwidth, pooled.dow.bandwidth,
    )
    return PriorSet(pooled=pooled, per_patient=per_patient, scope=scope)
