"""Timestamp parsing and calendar-month arithmetic."""
from __future__ import annotations

import calendar
from datetime import date, datetime, timezone

_PROSE_FORMATS = (
    "%B %d, %Y at %I:%M %p",
    "%b %d, %Y at %I:%M %p",
)


def parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 timestamp or a prose form like 'April 12, 2024 at 6:30 AM'.

    Timezone-aware values are converted to UTC and returned naive so every
    stored timestamp compares on one axis. Raises ValueError for anything
    else.
    """
    text = raw.strip()
    if not text:
        raise ValueError("empty timestamp")
    candidate = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    parsed: datetime | None = None
    try:
        parsed = datetime.fromisoformat(candidate)
    except ValueError:
        for fmt in _PROSE_FORMATS:
            try:
                parsed = datetime.strptime(text, fmt)
                break
            except ValueError:
                continue
    if parsed is None:
        raise ValueError(f"unsupported timestamp: {raw!r}")
    if parsed.tzinfo is not None:
        parsed = parsed.astimezone(timezone.utc).replace(tzinfo=None)
    return parsed


def parse_date(raw: str) -> date:
    """Parse a YYYY-MM-DD calendar date."""
    return date.fromisoformat(raw.strip())


def shift_months(day: date, months: int) -> date:
    """Shift a date by whole calendar months, clamping to the month end.

    Example: 2022-01-31 shifted +1 month is 2022-02-28.
    """
    total = day.year * 12 + (day.month - 1) + months
    year, month_index = divmod(total, 12)
    month = month_index + 1
    last = calendar.monthrange(year, month)[1]
    return date(year, month, min(day.day, last))


def month_year(day: date) -> str:
    """Render a date as 'June 2022' for queries and quarter headings."""
    return f"{calendar.month_name[day.month]} {day.year}"
