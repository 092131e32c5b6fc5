"""Domain types for the news, price, and financials corpus."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import date, datetime


@dataclass(frozen=True)
class Diagnostic:
    """A non-fatal ingestion problem tied to one input record.

    `line` is the 1-based line number for line-oriented sources and the
    0-based record index for JSON arrays; None when no position applies.
    """

    source: str
    line: int | None
    message: str

    def __str__(self) -> str:
        position = "?" if self.line is None else str(self.line)
        return f"{self.source}:{position}: {self.message}"


@dataclass(frozen=True)
class Company:
    name: str
    ticker: str
    description: str
    aliases: tuple[str, ...]

    def match_terms(self) -> tuple[str, ...]:
        """Alias strings plus the ticker, deduplicated, order preserved."""
        seen: dict[str, None] = {}
        for term in (*self.aliases, self.ticker):
            if term:
                seen.setdefault(term)
        return tuple(seen)


@dataclass(frozen=True)
class NewsArticle:
    id: str
    title: str
    description: str
    published_at: datetime
    keywords: tuple[str, ...]
    content: str
    url: str
    tickers: tuple[str, ...]


@dataclass(frozen=True)
class PriceBar:
    ticker: str
    date: date
    close: float


@dataclass(frozen=True)
class FinancialQuarter:
    ticker: str
    quarter_end: date
    total_revenue: float
    net_income: float
    eps: float
    free_cash_flow: float
    total_assets: float
    close_price: float


def article_id(title: str, published_at: datetime, url: str) -> str:
    """Deterministic article identity: hash of title, timestamp, and url."""
    payload = "\x1f".join((title, published_at.isoformat(), url))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Corpus:
    """Everything loaded for one experiment, immutable after construction."""

    companies: dict[str, Company]
    articles: tuple[NewsArticle, ...]
    prices: dict[str, tuple[PriceBar, ...]]
    financials: dict[str, tuple[FinancialQuarter, ...]]
    articles_by_ticker: dict[str, tuple[NewsArticle, ...]] = field(default_factory=dict)

    def company(self, ticker: str) -> Company:
        return self.companies[ticker]

    def articles_for(self, ticker: str) -> tuple[NewsArticle, ...]:
        return self.articles_by_ticker.get(ticker, ())

    def prices_for(self, ticker: str) -> tuple[PriceBar, ...]:
        return self.prices.get(ticker, ())

    def financials_for(self, ticker: str) -> tuple[FinancialQuarter, ...]:
        return self.financials.get(ticker, ())
