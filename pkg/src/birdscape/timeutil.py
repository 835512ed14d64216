"""UTC instant parsing and formatting (ISO 8601, Z-suffix tolerated)."""

from __future__ import annotations

from datetime import datetime, timezone

from .errors import InvalidParameterError


def parse_utc(value: str) -> datetime:
    """Parse an ISO 8601 instant; naive values are taken as UTC."""
    if not isinstance(value, str):
        raise InvalidParameterError(f"expected ISO 8601 string, got {type(value).__name__}")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise InvalidParameterError(f"bad timestamp {value!r}: {exc}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_utc(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat()


def now_utc() -> datetime:
    return datetime.now(timezone.utc)
