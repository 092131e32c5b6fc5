"""Sentence segmentation and fixed-size chunking of article text."""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..corpus.types import NewsArticle

_TERMINATOR_RUN = re.compile(r"[.!?]+")
_LAST_WORD = re.compile(r"(\S+)$")
_TRAILING_LETTERS = re.compile(r"[A-Za-z]+$")
_WHITESPACE = re.compile(r"\s+")

# Common title and business abbreviations whose trailing period does not
# end a sentence. Month names cover dateline styles like "Sept. 30".
_ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "rev", "gen", "sen", "rep", "gov",
        "st", "mt", "ft", "inc", "corp", "co", "ltd", "llc", "plc", "jr",
        "sr", "vs", "etc", "al", "approx", "dept", "est", "fig", "ref",
        "vol", "sec", "min", "max", "avg", "jan", "feb", "mar", "apr",
        "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
    }
)


def _collapse_ws(text: str) -> str:
    return _WHITESPACE.sub(" ", text).strip()


def _abbreviation_before(text: str, dot_index: int) -> bool:
    """True when the token ending at dot_index reads as an abbreviation."""
    match = _LAST_WORD.search(text, 0, dot_index)
    if match is None:
        return False
    word = match.group(1)
    if "." in word and not any(ch.isdigit() for ch in word):
        # Internal-dot tokens: U.S., e.g., i.e., bare domain names.
        # Digit-bearing tokens like $4.2B are amounts, not abbreviations.
        return True
    letters = _TRAILING_LETTERS.search(word)
    return letters is not None and letters.group().lower() in _ABBREVIATIONS


def split_sentences(text: str) -> list[str]:
    """Split text on ., !, ? with guards for abbreviations and decimals.

    A terminator ends a sentence only when followed by whitespace or the
    end of the text, which leaves decimals (3.5) and internal dots
    (U.S., site.com) intact. Single capital letters before a period are
    sentence ends, so 'A. B! C?' yields three sentences. Whitespace runs
    inside each sentence are collapsed to single spaces, so the word
    sequence of the input is preserved exactly.
    """
    sentences: list[str] = []
    start = 0
    for match in _TERMINATOR_RUN.finditer(text):
        end = match.end()
        if end < len(text) and not text[end].isspace():
            continue
        if match.group() == "." and _abbreviation_before(text, match.start()):
            continue
        piece = _collapse_ws(text[start:end])
        if piece:
            sentences.append(piece)
        start = end
    tail = _collapse_ws(text[start:])
    if tail:
        sentences.append(tail)
    return sentences


@dataclass(frozen=True)
class Chunk:
    """Up to chunk_size consecutive sentences of one article.

    sentence_span is the half-open [start, end) window into the
    article's sentence list, where sentence 0 is the title.
    """

    article_id: str
    ordinal: int
    text: str
    sentence_span: tuple[int, int]


def article_sentences(article: NewsArticle) -> list[str]:
    """The unit sequence for chunking: title first, then body sentences."""
    return [_collapse_ws(article.title)] + split_sentences(article.content)


def chunk_article(article: NewsArticle, chunk_size: int = 3) -> list[Chunk]:
    """Cut an article into non-overlapping, jointly exhaustive chunks.

    Chunks tile the sentence list in order; the last chunk may be
    short. An article with empty content still yields one title-only
    chunk.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be at least 1")
    sentences = article_sentences(article)
    chunks: list[Chunk] = []
    for ordinal, start in enumerate(range(0, len(sentences), chunk_size)):
        window = sentences[start : start + chunk_size]
        chunks.append(
            Chunk(
                article_id=article.id,
                ordinal=ordinal,
                text=" ".join(window),
                sentence_span=(start, start + len(window)),
            )
        )
    return chunks
