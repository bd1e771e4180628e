"""Timeline points and their CSV export."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, List

from seizurecast.core.manifest import atomic_write_text
from seizurecast.core.timeutil import format_utc, parse_utc
from seizurecast.uncertainty.mc import EXPORT_CLIP, PredictionDistribution, clip_uncertainty

logger = logging.getLogger("seizurecast.uncertainty.timeline")

TIMELINE_HEADER = [
    "timestamp", "score_mean", "score_std", "uncertainty", "uncertainty_clipped", "fused",
]


@dataclass(frozen=True)
class TimelinePoint:
    timestamp: datetime
    score_mean: float
    score_std: float
    uncertainty: float
    uncertainty_clipped: float
    fused: bool

    @classmethod
    def from_distribution(
        cls,
        timestamp: datetime,
        dist: PredictionDistribution,
        fused: bool,
        clip: float = EXPORT_CLIP,
    ) -> "TimelinePoint":
        return cls(
            timestamp=timestamp,
            score_mean=dist.mean,
            score_std=dist.std,
            uncertainty=dist.uncertainty,
            uncertainty_clipped=clip_uncertainty(dist.uncertainty, clip),
            fused=fused,
        )

    def row(self) -> List[str]:
        return [
            format_utc(self.timestamp),
            repr(self.score_mean),
            repr(self.score_std),
            repr(self.uncertainty),
            repr(self.uncertainty_clipped),
            "true" if self.fused else "false",
        ]


def timeline_csv(points: Iterable[TimelinePoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TIMELINE_HEADER)
    for point in points:
        writer.writerow(point.row())
    return buf.getvalue()


def write_timeline(points: Iterable[TimelinePoint], path: Path) -> Path:
    """Write the timeline CSV atomically; one row per inference window."""
    rows = list(points)
    out = atomic_write_text(Path(path), timeline_csv(rows))
    logger.info("wrote %d timeline points to %s", len(rows), out)
    return out


def read_timeline(path: Path) -> List[TimelinePoint]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            TimelinePoint(
                timestamp=parse_utc(r["timestamp"]),
                score_mean=float(r["score_mean"]),
                score_std=float(r["score_std"]),
                uncertainty=float(r["uncertainty"]),
                uncertainty_clipped=float(r["uncertainty_clipped"]),
                fused=r["fused"] == "true",
            )
            for r in csv.DictReader(fh)
        ]
