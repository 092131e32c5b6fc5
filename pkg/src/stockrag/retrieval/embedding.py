"""Embedding providers, cosine similarity, and the on-disk vector cache."""
from __future__ import annotations

import hashlib
import json
import math
import os
import re
from abc import ABC, abstractmethod
from collections.abc import Sequence
from pathlib import Path

import httpx

from ..errors import DegenerateEmbeddingError, DimensionMismatchError, TransportError

Vector = tuple[float, ...]

_TOKEN = re.compile(r"[0-9a-z]+")


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine of the angle between two vectors, clamped into [-1, 1]."""
    if len(a) != len(b):
        raise DimensionMismatchError(
            f"cannot compare vectors of dimension {len(a)} and {len(b)}"
        )
    dot = norm_a = norm_b = 0.0
    for x, y in zip(a, b):
        dot += x * y
        norm_a += x * x
        norm_b += y * y
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateEmbeddingError("cosine similarity of a zero vector")
    # Taking each root before multiplying keeps the denominator nonzero
    # even when norm_a * norm_b would underflow to 0.0.
    return max(-1.0, min(1.0, dot / (math.sqrt(norm_a) * math.sqrt(norm_b))))


class EmbeddingProvider(ABC):
    """Maps text batches to fixed-dimension vectors."""

    name: str
    model: str
    dimension: int

    @abstractmethod
    def embed_batch(self, texts: Sequence[str]) -> list[Vector]:
        """Embed texts in order; output length equals input length."""

    def embed(self, text: str) -> Vector:
        return self.embed_batch([text])[0]


class HashingEmbedder(EmbeddingProvider):
    """Deterministic signed feature hashing over unigrams and bigrams.

    Tokens are lowercased alphanumeric runs. Each feature hashes to one
    slot with sign +/-1 via blake2b, so identical text always yields an
    identical unit-length vector, on any machine, with no model weights.
    """

    name = "local"

    def __init__(self, dimension: int = 256, model: str = "feature-hash-v1"):
        if dimension < 1:
            raise ValueError("dimension must be at least 1")
        self.dimension = dimension
        self.model = model

    def embed_batch(self, texts: Sequence[str]) -> list[Vector]:
        return [self._embed_one(text) for text in texts]

    def _embed_one(self, text: str) -> Vector:
        tokens = _TOKEN.findall(text.lower())
        if not tokens:
            raise DegenerateEmbeddingError(f"no indexable tokens in {text!r}")
        accumulator = [0.0] * self.dimension
        features = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
        for feature in features:
            digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "big")
            sign = 1.0 if (value >> 32) & 1 == 0 else -1.0
            accumulator[value % self.dimension] += sign
        norm = math.sqrt(sum(v * v for v in accumulator))
        if norm == 0.0:
            raise DegenerateEmbeddingError(
                f"features cancelled to a zero vector for {text!r}"
            )
        return tuple(v / norm for v in accumulator)


class RemoteEmbedder(EmbeddingProvider):
    """Client for an embeddings endpoint speaking the common JSON shape:

    request  {"model": ..., "input": [text, ...]}
    response {"data": [{"embedding": [float, ...]}, ...]} in input order.
    """

    name = "remote"

    def __init__(
        self,
        endpoint: str,
        model: str,
        dimension: int,
        api_key_env: str = "STOCKRAG_API_KEY",
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.dimension = dimension
        self.api_key_env = api_key_env
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def embed_batch(self, texts: Sequence[str]) -> list[Vector]:
        if not texts:
            return []
        headers = {}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            response = self._client.post(
                self.endpoint,
                json={"model": self.model, "input": list(texts)},
                headers=headers,
            )
            response.raise_for_status()
            payload = response.json()
            vectors = [
                tuple(float(x) for x in item["embedding"]) for item in payload["data"]
            ]
        except httpx.HTTPError as exc:
            raise TransportError(f"embedding request failed: {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(texts):
            raise TransportError(
                f"embedding count mismatch: sent {len(texts)}, got {len(vectors)}"
            )
        for vector in vectors:
            if len(vector) != self.dimension:
                raise DimensionMismatchError(
                    f"endpoint returned dimension {len(vector)}, expected {self.dimension}"
                )
        return vectors


def text_key(text: str) -> str:
    """Content hash used as the cache key component for one text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class EmbeddingCache:
    """Append-only JSONL cache keyed by (provider, model, content hash)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[tuple[str, str, str], Vector] = {}
        if self.path.exists():
            with self.path.open(encoding="utf-8") as handle:
                for line in handle:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    key = (entry["provider"], entry["model"], entry["key"])
                    self._entries[key] = tuple(entry["vector"])

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, provider: str, model: str, text: str) -> Vector | None:
        return self._entries.get((provider, model, text_key(text)))

    def put(self, provider: str, model: str, text: str, vector: Vector) -> None:
        key = (provider, model, text_key(text))
        if key in self._entries:
            return
        self._entries[key] = tuple(vector)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(
                json.dumps(
                    {
                        "provider": provider,
                        "model": model,
                        "key": key[2],
                        "vector": list(vector),
                    }
                )
                + "\n"
            )


class CachedEmbedder(EmbeddingProvider):
    """Wraps a provider with a read-through EmbeddingCache."""

    def __init__(self, inner: EmbeddingProvider, cache: EmbeddingCache):
        self.inner = inner
        self.cache = cache
        self.name = inner.name
        self.model = inner.model
        self.dimension = inner.dimension

    def embed_batch(self, texts: Sequence[str]) -> list[Vector]:
        results: list[Vector | None] = [
            self.cache.get(self.name, self.model, text) for text in texts
        ]
        missing = [i for i, vector in enumerate(results) if vector is None]
        if missing:
            fresh = self.inner.embed_batch([texts[i] for i in missing])
            for index, vector in zip(missing, fresh):
                self.cache.put(self.name, self.model, texts[index], vector)
                results[index] = vector
        return [vector for vector in results if vector is not None]
