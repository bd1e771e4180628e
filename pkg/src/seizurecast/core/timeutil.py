"""UTC timestamp helpers.

All timestamps crossing a file boundary are ISO-8601 in UTC with a ``Z``
suffix; everything in memory is a timezone-aware ``datetime``.
"""

from __future__ import annotations

from datetime import datetime, timezone
from typing import Iterable, List

from seizurecast.core.contracts import ValidationError


def ensure_utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        raise ValidationError(f"naive timestamp {ts.isoformat()} (UTC offset required)")
    return ts.astimezone(timezone.utc)


def parse_utc(text: str) -> datetime:
    raw = text.strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValidationError(f"bad timestamp {text!r}: {exc}") from exc
    return ensure_utc(ts)


def format_utc(ts: datetime) -> str:
    ts = ensure_utc(ts)
    if ts.microsecond:
        return ts.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def offsets_from(start: datetime, stamps: Iterable[datetime]) -> List[float]:
    """Seconds of each stamp relative to *start*."""
    base = ensure_utc(start)
    return [(ensure_utc(s) - base).total_seconds() for s in stamps]
