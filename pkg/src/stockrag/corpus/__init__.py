"""Corpus domain types and file ingestion."""
from .ingest import (
    build_corpus,
    ingest_financials,
    ingest_news,
    ingest_prices,
    load_corpus,
    load_registry,
    tag_article,
)
from .types import (
    Company,
    Corpus,
    Diagnostic,
    FinancialQuarter,
    NewsArticle,
    PriceBar,
    article_id,
)

__all__ = [
    "Company",
    "Corpus",
    "Diagnostic",
    "FinancialQuarter",
    "NewsArticle",
    "PriceBar",
    "article_id",
    "build_corpus",
    "ingest_financials",
    "ingest_news",
    "ingest_prices",
    "load_corpus",
    "load_registry",
    "tag_article",
]
