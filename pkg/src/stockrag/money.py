"""Currency parsing and rendering with K/M/B/T magnitude suffixes."""
from __future__ import annotations

import re

_SUFFIX_SCALE = {"K": 1e3, "M": 1e6, "B": 1e9, "T": 1e12}

_MONEY_RE = re.compile(
    r"^(-)?\$?(-)?([0-9][0-9,]*(?:\.[0-9]+)?)\s*([KMBT])?$",
    re.IGNORECASE,
)


def parse_money(value: object) -> float:
    """Parse a currency amount such as '$121.23B', '-$2.03B', or a bare number."""
    if isinstance(value, bool):
        raise ValueError(f"unparseable currency value: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        match = _MONEY_RE.match(value.strip())
        if match:
            sign = -1.0 if (match.group(1) or match.group(2)) else 1.0
            number = float(match.group(3).replace(",", ""))
            scale = _SUFFIX_SCALE[match.group(4).upper()] if match.group(4) else 1.0
            return sign * number * scale
    raise ValueError(f"unparseable currency value: {value!r}")


def format_money(value: float) -> str:
    """Render a dollar amount with two decimals and the largest fitting suffix.

    Amounts under one thousand stay plain: 106.21 -> '$106.21',
    121.23e9 -> '$121.23B', -2.03e9 -> '-$2.03B'.
    """
    sign = "-" if value < 0 else ""
    magnitude = abs(value)
    for suffix, scale in (("T", 1e12), ("B", 1e9), ("M", 1e6), ("K", 1e3)):
        if magnitude >= scale:
            return f"{sign}${magnitude / scale:.2f}{suffix}"
    return f"{sign}${magnitude:.2f}"
