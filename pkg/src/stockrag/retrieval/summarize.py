"""Query construction, date-window filtering, and chunk ranking.

The extractive path is the default: articles inside the lookback window
are chunked, embedded, and ranked by cosine similarity against the
query. The abstractive path asks a chat model to compress each article
instead, and is kept out of the default pipeline.
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from datetime import date, datetime, time
from typing import Protocol

from ..corpus.types import Company, Corpus, NewsArticle
from ..dates import month_year, shift_months
from .embedding import EmbeddingProvider, Vector, cosine_similarity
from .text import Chunk, chunk_article

QUERY_TEMPLATES = {
    "invest_in": "Investing in {company} company in {date}.",
    "should_i_invest": "Should I invest in {company} company {date}?",
    "bullish_bearish": (
        "Is {company} company index bullish/going up after {date} "
        "or bearish/going down?"
    ),
}


@dataclass(frozen=True)
class Query:
    """A simulated investor question anchored to a company and a date."""

    company_ticker: str
    as_of: date
    text: str
    template_id: str = "invest_in"


def make_query(company: Company, as_of: date, template_id: str = "invest_in") -> Query:
    """Render a query template with the company name and 'Month YYYY' date."""
    try:
        template = QUERY_TEMPLATES[template_id]
    except KeyError:
        raise ValueError(f"unknown query template {template_id!r}") from None
    text = template.format(company=company.name, date=month_year(as_of))
    return Query(company.ticker, as_of, text, template_id)


@dataclass(frozen=True)
class EmbeddedChunk:
    chunk: Chunk
    vector: Vector


@dataclass(frozen=True)
class RankedChunk:
    chunk: Chunk
    similarity: float
    article_title: str


def filter_articles(
    corpus: Corpus, ticker: str, as_of: date, window_months: int = 2
) -> list[NewsArticle]:
    """Articles for ticker published inside [as_of - window, as_of).

    The window is half-open: anything stamped at or after midnight on
    as_of is excluded, so no future text can leak into a prompt.
    """
    if window_months < 1:
        raise ValueError("window_months must be at least 1")
    lower = datetime.combine(shift_months(as_of, -window_months), time.min)
    upper = datetime.combine(as_of, time.min)
    kept = [
        article
        for article in corpus.articles_for(ticker)
        if lower <= article.published_at < upper
    ]
    kept.sort(key=lambda a: (a.published_at, a.id))
    return kept


def rank_chunks(
    query_vector: Vector,
    chunks: Sequence[EmbeddedChunk],
    k: int,
    article_meta: Mapping[str, NewsArticle],
) -> list[RankedChunk]:
    """Top-k chunks by cosine similarity, deterministically tie-broken.

    Ties prefer the more recently published article, then ascending
    article id, then ascending chunk ordinal. Mixing vectors of another
    dimension raises DimensionMismatchError.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    decorated = []
    for embedded in chunks:
        similarity = cosine_similarity(query_vector, embedded.vector)
        article = article_meta[embedded.chunk.article_id]
        decorated.append((similarity, article.published_at, article.title, embedded.chunk))
    decorated.sort(
        key=lambda item: (
            -item[0],
            datetime.max - item[1],
            item[3].article_id,
            item[3].ordinal,
        )
    )
    return [
        RankedChunk(chunk=chunk, similarity=similarity, article_title=title)
        for similarity, _, title, chunk in decorated[:k]
    ]


def summarize_extractive(
    corpus: Corpus,
    query: Query,
    provider: EmbeddingProvider,
    *,
    k: int = 6,
    window_months: int = 2,
    chunk_size: int = 3,
) -> list[RankedChunk]:
    """Retrieve the k most query-similar chunks from the lookback window.

    Returns an empty list when no articles fall inside the window.
    """
    articles = filter_articles(corpus, query.company_ticker, query.as_of, window_months)
    if not articles:
        return []
    chunks = [
        chunk for article in articles for chunk in chunk_article(article, chunk_size)
    ]
    vectors = provider.embed_batch([chunk.text for chunk in chunks])
    embedded = [EmbeddedChunk(c, v) for c, v in zip(chunks, vectors)]
    query_vector = provider.embed(query.text)
    meta = {article.id: article for article in articles}
    return rank_chunks(query_vector, embedded, k, meta)


class SupportsComplete(Protocol):
    """Minimal chat-client surface needed by abstractive summarization."""

    def complete(self, prompt: str, *, request_key: str | None = None) -> str: ...


ABSTRACTIVE_INSTRUCTION = (
    "Summarize the following news article in at most three sentences, keeping "
    "only information useful for answering this question: {query}"
)


def summarize_abstractive(
    articles: Sequence[NewsArticle],
    query: Query,
    client: SupportsComplete,
) -> list[tuple[str, str]]:
    """Ask a chat model to compress each article; returns (title, summary).

    Client failures propagate after the client's own retry policy.
    """
    summaries: list[tuple[str, str]] = []
    for article in articles:
        prompt = (
            ABSTRACTIVE_INSTRUCTION.format(query=query.text)
            + f"\n\nTitle: {article.title}\n\n{article.content}"
        )
        summaries.append(
            (article.title, client.complete(prompt, request_key=f"summary:{article.id}"))
        )
    return summaries
