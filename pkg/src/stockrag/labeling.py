"""Forward-return labels and price-momentum measurements.

Both endpoints of a return resolve to the first price bar at or after
the requested calendar date, within a 14-day tolerance; horizon offsets
are whole calendar months with month-end clamping. A label is 1 (UP)
only for a strictly positive forward return, so an exactly flat price
counts as DOWN.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from datetime import date
from typing import Sequence

from .corpus.types import PriceBar
from .dates import shift_months
from .errors import MissingPriceError

MAX_PRICE_GAP_DAYS = 14


@dataclass(frozen=True)
class Label:
    """Binary movement outcome for one (date, horizon) pair."""

    value: int  # 1 = UP, 0 = DOWN
    forward_return: float
    base_date: date
    resolve_date: date


@dataclass(frozen=True)
class Momentum:
    """Trailing price momentum; a component is None when its lookback
    endpoint has no resolvable price."""

    six_month: float | None
    twelve_month: float | None


def price_at_or_after(series: Sequence[PriceBar], target: date) -> PriceBar:
    """First bar dated on or after target, at most 14 days later.

    The series must be ascending by date. Raises MissingPriceError when
    the series ends before target or the first candidate is too far out.
    """
    index = bisect.bisect_left(series, target, key=lambda bar: bar.date)
    if index == len(series):
        raise MissingPriceError(f"no price bar at or after {target}")
    bar = series[index]
    if (bar.date - target).days > MAX_PRICE_GAP_DAYS:
        raise MissingPriceError(
            f"nearest bar {bar.date} is more than {MAX_PRICE_GAP_DAYS} days after {target}"
        )
    return bar


def forward_return(
    series: Sequence[PriceBar], base: date, horizon_months: int
) -> Label:
    """Label the move from base to base + horizon_months.

    Both the base and resolution prices use at-or-after resolution, so
    a base date on a weekend reads the next trading day's close.
    """
    if horizon_months < 1:
        raise ValueError("horizon_months must be at least 1")
    base_bar = price_at_or_after(series, base)
    resolve_bar = price_at_or_after(series, shift_months(base, horizon_months))
    change = (resolve_bar.close - base_bar.close) / base_bar.close
    return Label(
        value=1 if change > 0 else 0,
        forward_return=change,
        base_date=base,
        resolve_date=resolve_bar.date,
    )


def momentum(series: Sequence[PriceBar], base: date) -> Momentum:
    """Six and twelve month trailing returns ending at base."""

    def component(months: int) -> float | None:
        try:
            current = price_at_or_after(series, base)
            past = price_at_or_after(series, shift_months(base, -months))
        except MissingPriceError:
            return None
        return current.close / past.close - 1.0

    return Momentum(six_month=component(6), twelve_month=component(12))
