"""Loaders for the four input files: registry, news, prices, financials.

Every loader is a pure function of its file contents. Malformed records
are never silently dropped: each rejection produces a Diagnostic, so for
line-oriented sources len(valid) + len(diagnostics) equals the number of
non-blank input lines.
"""
from __future__ import annotations

import csv
import json
from datetime import datetime
from pathlib import Path

from ..dates import parse_date, parse_timestamp
from ..errors import IngestError
from ..matching import term_pattern
from ..money import parse_money
from .types import (
    Company,
    Corpus,
    Diagnostic,
    FinancialQuarter,
    NewsArticle,
    PriceBar,
    article_id,
)

_FINANCIAL_MONEY_FIELDS = (
    "total_revenue",
    "net_income",
    "free_cash_flow",
    "total_assets",
    "close_price",
)


def load_registry(path: str | Path) -> dict[str, Company]:
    """Load the company registry, keyed by ticker.

    The registry is small and curated, so any defect here is fatal
    rather than a diagnostic.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"cannot read registry {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"registry {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise IngestError(f"registry {path} must be a JSON array")

    companies: dict[str, Company] = {}
    for index, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise IngestError(f"registry entry {index} is not an object")
        try:
            name = str(entry["name"]).strip()
            ticker = str(entry["ticker"]).strip()
            description = str(entry["description"]).strip()
            aliases = tuple(str(a).strip() for a in entry.get("aliases", []))
        except KeyError as exc:
            raise IngestError(f"registry entry {index} missing field {exc}") from exc
        if not name or not ticker or not description:
            raise IngestError(f"registry entry {index} has an empty required field")
        if ticker in companies:
            raise IngestError(f"registry entry {index} duplicates ticker {ticker}")
        if name not in aliases:
            aliases = (name, *aliases)
        companies[ticker] = Company(name, ticker, description, aliases)
    if not companies:
        raise IngestError(f"registry {path} defines no companies")
    return companies


def tag_article(
    title: str,
    description: str,
    keywords: tuple[str, ...],
    companies: dict[str, Company],
) -> tuple[str, ...]:
    """Return tickers of companies whose alias or ticker appears whole-word.

    Matching is case-insensitive except for terms of one or two
    characters (short tickers like 'V' or 'MA'), which must appear in
    their exact case to avoid tagging every lowercase 'v'.
    """
    haystack = "\n".join((title, description, *keywords))
    tagged: set[str] = set()
    for ticker, company in companies.items():
        terms = company.match_terms()
        long_terms = tuple(t for t in terms if len(t) > 2)
        short_terms = tuple(t for t in terms if len(t) <= 2)
        if long_terms and term_pattern(long_terms, ignore_case=True).search(haystack):
            tagged.add(ticker)
            continue
        if short_terms and term_pattern(short_terms, ignore_case=False).search(haystack):
            tagged.add(ticker)
    return tuple(sorted(tagged))


def ingest_news(
    path: str | Path, companies: dict[str, Company]
) -> tuple[list[NewsArticle], list[Diagnostic]]:
    """Parse a JSONL news file into tagged articles.

    Args:
        path: JSONL file, one article object per line.
        companies: registry used for ticker tagging.

    Returns:
        (articles in file order, diagnostics for every rejected line).
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read news file {path}: {exc}") from exc

    source = str(path)
    articles: list[NewsArticle] = []
    diagnostics: list[Diagnostic] = []
    seen_ids: set[str] = set()

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            diagnostics.append(Diagnostic(source, lineno, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(record, dict):
            diagnostics.append(Diagnostic(source, lineno, "record is not an object"))
            continue

        title = record.get("title")
        if not isinstance(title, str) or not title.strip():
            diagnostics.append(Diagnostic(source, lineno, "missing or empty title"))
            continue
        raw_dt = record.get("datetime")
        if not isinstance(raw_dt, str):
            diagnostics.append(Diagnostic(source, lineno, "missing datetime"))
            continue
        try:
            published_at = parse_timestamp(raw_dt)
        except ValueError as exc:
            diagnostics.append(Diagnostic(source, lineno, str(exc)))
            continue
        raw_keywords = record.get("keywords", [])
        if not isinstance(raw_keywords, list) or not all(
            isinstance(k, str) for k in raw_keywords
        ):
            diagnostics.append(Diagnostic(source, lineno, "keywords must be strings"))
            continue

        title = title.strip()
        description = str(record.get("description") or "")
        content = str(record.get("content") or "")
        url = str(record.get("url") or "")
        keywords = tuple(k.strip() for k in raw_keywords if k.strip())

        identity = article_id(title, published_at, url)
        if identity in seen_ids:
            diagnostics.append(
                Diagnostic(
                    source, lineno, f"duplicate article {identity}; keeping the first"
                )
            )
            continue
        seen_ids.add(identity)

        articles.append(
            NewsArticle(
                id=identity,
                title=title,
                description=description,
                published_at=published_at,
                keywords=keywords,
                content=content,
                url=url,
                tickers=tag_article(title, description, keywords, companies),
            )
        )
    return articles, diagnostics


def ingest_prices(
    path: str | Path,
) -> tuple[dict[str, tuple[PriceBar, ...]], list[Diagnostic]]:
    """Parse a ticker,date,close CSV into per-ticker ascending series.

    A repeated (ticker, date) pair keeps the last row and records a
    diagnostic; non-positive closes are rejected.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read price file {path}: {exc}") from exc

    source = str(path)
    reader = csv.DictReader(text.splitlines())
    required = {"ticker", "date", "close"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise IngestError(f"price file {path} must have header ticker,date,close")

    diagnostics: list[Diagnostic] = []
    by_ticker: dict[str, dict] = {}
    for lineno, row in enumerate(reader, start=2):
        ticker = (row.get("ticker") or "").strip()
        raw_date = (row.get("date") or "").strip()
        raw_close = (row.get("close") or "").strip()
        if not ticker or not raw_date or not raw_close:
            diagnostics.append(Diagnostic(source, lineno, "incomplete row"))
            continue
        try:
            day = parse_date(raw_date)
        except ValueError:
            diagnostics.append(Diagnostic(source, lineno, f"bad date {raw_date!r}"))
            continue
        try:
            close = float(raw_close)
        except ValueError:
            diagnostics.append(Diagnostic(source, lineno, f"bad close {raw_close!r}"))
            continue
        if close <= 0:
            diagnostics.append(
                Diagnostic(source, lineno, f"non-positive close {close}")
            )
            continue
        series = by_ticker.setdefault(ticker, {})
        if day in series:
            diagnostics.append(
                Diagnostic(
                    source, lineno, f"duplicate ({ticker}, {day}); keeping the last"
                )
            )
        series[day] = PriceBar(ticker, day, close)

    prices = {
        ticker: tuple(series[d] for d in sorted(series))
        for ticker, series in by_ticker.items()
    }
    return prices, diagnostics


def ingest_financials(
    path: str | Path,
) -> tuple[dict[str, tuple[FinancialQuarter, ...]], list[Diagnostic]]:
    """Parse a JSON array of quarterly fundamentals into ascending series.

    Currency fields accept bare numbers or suffixed strings such as
    '$121.23B'. Errors mirror ingest_prices: unreadable file is fatal,
    bad records become diagnostics, duplicate (ticker, quarter_end)
    keeps the last.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestError(f"cannot read financials file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"financials file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise IngestError(f"financials file {path} must be a JSON array")

    source = str(path)
    diagnostics: list[Diagnostic] = []
    by_ticker: dict[str, dict] = {}
    for index, record in enumerate(raw):
        if not isinstance(record, dict):
            diagnostics.append(Diagnostic(source, index, "record is not an object"))
            continue
        ticker = str(record.get("ticker") or "").strip()
        if not ticker:
            diagnostics.append(Diagnostic(source, index, "missing ticker"))
            continue
        try:
            quarter_end = parse_date(str(record["quarter_end"]))
        except (KeyError, ValueError):
            diagnostics.append(Diagnostic(source, index, "missing or bad quarter_end"))
            continue

        values: dict[str, float] = {}
        problem = None
        for fieldname in _FINANCIAL_MONEY_FIELDS:
            if fieldname not in record:
                problem = f"missing field {fieldname}"
                break
            try:
                values[fieldname] = parse_money(record[fieldname])
            except ValueError:
                problem = f"bad value for {fieldname}: {record[fieldname]!r}"
                break
        if problem is None:
            try:
                values["eps"] = float(record["eps"])
            except (KeyError, TypeError, ValueError):
                problem = "missing or bad eps"
        if problem is None and values["total_revenue"] < 0:
            problem = "negative total_revenue"
        if problem is None and values["total_assets"] < 0:
            problem = "negative total_assets"
        if problem is None and values["close_price"] <= 0:
            problem = "non-positive close_price"
        if problem is not None:
            diagnostics.append(Diagnostic(source, index, problem))
            continue

        series = by_ticker.setdefault(ticker, {})
        if quarter_end in series:
            diagnostics.append(
                Diagnostic(
                    source,
                    index,
                    f"duplicate ({ticker}, {quarter_end}); keeping the last",
                )
            )
        series[quarter_end] = FinancialQuarter(
            ticker=ticker,
            quarter_end=quarter_end,
            total_revenue=values["total_revenue"],
            net_income=values["net_income"],
            eps=values["eps"],
            free_cash_flow=values["free_cash_flow"],
            total_assets=values["total_assets"],
            close_price=values["close_price"],
        )

    financials = {
        ticker: tuple(series[d] for d in sorted(series))
        for ticker, series in by_ticker.items()
    }
    return financials, diagnostics


def build_corpus(
    companies: dict[str, Company],
    articles: list[NewsArticle],
    prices: dict[str, tuple[PriceBar, ...]],
    financials: dict[str, tuple[FinancialQuarter, ...]],
) -> tuple[Corpus, list[Diagnostic]]:
    """Assemble validated pieces into one immutable Corpus.

    Price or financial series for tickers absent from the registry are
    dropped with a diagnostic; article ticker tags are intersected with
    the registry.
    """
    diagnostics: list[Diagnostic] = []

    kept_prices: dict[str, tuple[PriceBar, ...]] = {}
    for ticker, series in prices.items():
        if ticker in companies:
            kept_prices[ticker] = series
        else:
            diagnostics.append(
                Diagnostic("prices", None, f"unknown ticker {ticker}; dropped series")
            )
    kept_financials: dict[str, tuple[FinancialQuarter, ...]] = {}
    for ticker, series in financials.items():
        if ticker in companies:
            kept_financials[ticker] = series
        else:
            diagnostics.append(
                Diagnostic(
                    "financials", None, f"unknown ticker {ticker}; dropped series"
                )
            )

    ordered = tuple(sorted(articles, key=lambda a: (a.published_at, a.id)))
    by_ticker: dict[str, list[NewsArticle]] = {}
    for article in ordered:
        for ticker in article.tickers:
            if ticker in companies:
                by_ticker.setdefault(ticker, []).append(article)

    corpus = Corpus(
        companies=dict(companies),
        articles=ordered,
        prices=kept_prices,
        financials=kept_financials,
        articles_by_ticker={t: tuple(arts) for t, arts in by_ticker.items()},
    )
    return corpus, diagnostics


def load_corpus(
    registry_path: str | Path,
    news_path: str | Path,
    prices_path: str | Path,
    financials_path: str | Path,
) -> tuple[Corpus, list[Diagnostic]]:
    """Load all four inputs and assemble the corpus in one call."""
    companies = load_registry(registry_path)
    articles, news_diags = ingest_news(news_path, companies)
    prices, price_diags = ingest_prices(prices_path)
    financials, fin_diags = ingest_financials(financials_path)
    corpus, corpus_diags = build_corpus(companies, articles, prices, financials)
    return corpus, [*news_diags, *price_diags, *fin_diags, *corpus_diags]
