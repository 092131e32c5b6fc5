"""News retrieval: chunking, embedding, and similarity ranking."""
from .embedding import (
    CachedEmbedder,
    EmbeddingCache,
    EmbeddingProvider,
    HashingEmbedder,
    RemoteEmbedder,
    Vector,
    cosine_similarity,
    text_key,
)
from .summarize import (
    QUERY_TEMPLATES,
    EmbeddedChunk,
    Query,
    RankedChunk,
    filter_articles,
    make_query,
    rank_chunks,
    summarize_abstractive,
    summarize_extractive,
)
from .text import Chunk, article_sentences, chunk_article, split_sentences

__all__ = [
    "QUERY_TEMPLATES",
    "CachedEmbedder",
    "Chunk",
    "EmbeddedChunk",
    "EmbeddingCache",
    "EmbeddingProvider",
    "HashingEmbedder",
    "Query",
    "RankedChunk",
    "RemoteEmbedder",
    "Vector",
    "article_sentences",
    "chunk_article",
    "cosine_similarity",
    "filter_articles",
    "make_query",
    "rank_chunks",
    "split_sentences",
    "summarize_abstractive",
    "summarize_extractive",
    "text_key",
]
