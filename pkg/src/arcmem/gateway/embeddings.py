"""Embedding providers.

The bundled fallback hashes character trigrams into a fixed-dimension
frequency vector so the whole system runs offline and deterministically;
any real provider can be plugged in behind the same protocol.
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol, Sequence

import numpy as np

from .errors import EmptyTextError

FALLBACK_DIMENSION = 256


class EmbeddingProvider(Protocol):
    name: str
    dimension: int

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


def embed_texts(provider: EmbeddingProvider, texts: Sequence[str]) -> list[list[float]]:
    """One vector per text, each of the provider's dimension."""
    if not texts:
        raise EmptyTextError("embed_texts requires at least one text")
    for i, t in enumerate(texts):
        if not t or not t.strip():
            raise EmptyTextError(f"text at index {i} is empty")
    vectors = provider.embed(texts)
    if len(vectors) != len(texts):
        raise ValueError(f"provider returned {len(vectors)} vectors for {len(texts)} texts")
    for v in vectors:
        if len(v) != provider.dimension:
            raise ValueError(f"provider returned dimension {len(v)}, expected {provider.dimension}")
    return vectors


def _gram_index(gram: str, dimension: int) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dimension


class HashedNgramEmbedder:
    """Offline embedding: hashed character-trigram counts, L2-normalized.

    Deterministic across runs and platforms, and crude-but-meaningful for
    lexical similarity, which is all the offline pipeline needs.
    """

    def __init__(self, dimension: int = FALLBACK_DIMENSION):
        if dimension < 2:
            raise ValueError("dimension must be >= 2")
        self.name = "hashed-3gram"
        self.dimension = dimension

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> list[float]:
        collapsed = re.sub(r"\s+", " ", text.strip()).casefold()
        padded = f" {collapsed} "
        if len(padded) < 3:
            grams = [padded]
        else:
            grams = [padded[i : i + 3] for i in range(len(padded) - 2)]
        vec = np.zeros(self.dimension, dtype=np.float64)
        for gram in grams:
            vec[_gram_index(gram, self.dimension)] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise EmptyTextError("cannot embed empty text")
        return (vec / norm).tolist()
