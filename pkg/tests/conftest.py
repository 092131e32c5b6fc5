"""Shared fixtures and tiny builders for the test suite."""
from __future__ import annotations

import json
import os
from datetime import date, datetime, timedelta
from pathlib import Path

import pytest

from stockrag.corpus.types import (
    Company,
    Corpus,
    FinancialQuarter,
    NewsArticle,
    PriceBar,
    article_id,
)
from stockrag.experiment import load_config, run_pipeline

FIXTURES = Path(__file__).parent / "fixtures"


def make_company(
    name: str = "Amazon",
    ticker: str = "AMZN",
    description: str = "Amazon is a leader in the e-commerce and cloud computing sectors, pioneering new standards in online retail and services.",
    aliases: tuple[str, ...] = ("Amazon", "Amazon.com", "AMZN"),
) -> Company:
    return Company(name=name, ticker=ticker, description=description, aliases=aliases)


def make_article(
    title: str,
    published_at: datetime,
    content: str = "",
    tickers: tuple[str, ...] = ("AMZN",),
    description: str = "",
    keywords: tuple[str, ...] = (),
    url: str = "https://example.com/a",
) -> NewsArticle:
    return NewsArticle(
        id=article_id(title, published_at, url),
        title=title,
        description=description,
        published_at=published_at,
        keywords=keywords,
        content=content,
        url=url,
        tickers=tickers,
    )


def make_bars(
    ticker: str,
    start: date,
    closes: list[float],
    step_days: int = 1,
) -> tuple[PriceBar, ...]:
    """A price series with one bar every step_days starting at start."""
    return tuple(
        PriceBar(ticker=ticker, date=start + timedelta(days=i * step_days), close=c)
        for i, c in enumerate(closes)
    )


def make_quarter(
    ticker: str = "AMZN",
    quarter_end: date = date(2022, 6, 30),
    total_revenue: float = 121.23e9,
    net_income: float = -2.03e9,
    eps: float = -0.2,
    free_cash_flow: float = -6.76e9,
    total_assets: float = 419.73e9,
    close_price: float = 106.21,
) -> FinancialQuarter:
    return FinancialQuarter(
        ticker=ticker,
        quarter_end=quarter_end,
        total_revenue=total_revenue,
        net_income=net_income,
        eps=eps,
        free_cash_flow=free_cash_flow,
        total_assets=total_assets,
        close_price=close_price,
    )


def make_corpus(
    companies: dict[str, Company],
    articles: tuple[NewsArticle, ...] = (),
    prices: dict[str, tuple[PriceBar, ...]] | None = None,
    financials: dict[str, tuple[FinancialQuarter, ...]] | None = None,
) -> Corpus:
    by_ticker: dict[str, tuple[NewsArticle, ...]] = {}
    for ticker in companies:
        by_ticker[ticker] = tuple(a for a in articles if ticker in a.tickers)
    return Corpus(
        companies=companies,
        articles=tuple(sorted(articles, key=lambda a: (a.published_at, a.id))),
        prices=prices or {},
        financials=financials or {},
        articles_by_ticker=by_ticker,
    )


def base_config_dict(**overrides) -> dict:
    """A syntactically valid config document; paths need not exist."""
    document = {
        "registry_path": "registry.json",
        "news_path": "news.jsonl",
        "prices_path": "prices.csv",
        "financials_path": "financials.json",
        "companies": ["AMZN"],
        "as_of_dates": ["2022-07-01"],
        "models": [
            {
                "provider": "scripted_mock",
                "model_name": "mock",
                "script_path": "script.json",
            }
        ],
    }
    document.update(overrides)
    return document


def write_fixture_config(directory: Path, **overrides) -> Path:
    """A config file in directory whose inputs point back at the fixtures."""
    document = base_config_dict(
        registry_path=os.path.relpath(FIXTURES / "registry.json", directory),
        news_path=os.path.relpath(FIXTURES / "news.jsonl", directory),
        prices_path=os.path.relpath(FIXTURES / "prices.csv", directory),
        financials_path=os.path.relpath(FIXTURES / "financials.json", directory),
    )
    document["models"][0]["script_path"] = os.path.relpath(
        FIXTURES / "mock_script.json", directory
    )
    document.update(overrides)
    path = directory / "config.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def fixture_config():
    """The committed end-to-end config, with outputs kept out of the repo."""
    return load_config(FIXTURES / "config.json")


@pytest.fixture(scope="session")
def pipeline_out(fixture_config, tmp_path_factory):
    """One full pipeline run over the committed fixture, shared read-only."""
    out_dir = tmp_path_factory.mktemp("pipeline")
    config = fixture_config.model_copy(update={"out_dir": str(out_dir)})
    summary = run_pipeline(config)
    return config, summary, out_dir
