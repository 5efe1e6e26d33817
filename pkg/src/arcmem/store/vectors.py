"""Episodic vector store: cosine retrieval over normalized embeddings.

Retrieval is an exhaustive scan (corpora are hundreds of records per
season), which keeps results deterministic. Persistence is JSON-lines
metadata plus a packed little-endian float32 sidecar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ..model import EpisodeKey, SeriesId

TARGET_KINDS = ("arc_summary", "progression", "utterance")


class VectorStoreError(ValueError):
    pass


class DimensionMismatchError(VectorStoreError):
    pass


class ZeroVectorError(VectorStoreError):
    pass


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """dot(a, b) / (|a| |b|), clipped to [-1, 1]."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise DimensionMismatchError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class EmbeddingRecord:
    """One stored embedding with the metadata used for filtered retrieval."""

    record_id: str
    target_kind: str
    target_id: str
    series: SeriesId
    vector: tuple[float, ...]
    text: str
    episode: EpisodeKey | None = None
    arc_id: str | None = None

    def __post_init__(self) -> None:
        if self.target_kind not in TARGET_KINDS:
            raise VectorStoreError(f"unknown target kind: {self.target_kind!r}")

    def to_meta(self) -> dict:
        return {
            "record_id": self.record_id,
            "target_kind": self.target_kind,
            "target_id": self.target_id,
            "series": self.series.name,
            "episode": self.episode.to_json() if self.episode else None,
            "arc_id": self.arc_id,
            "text": self.text,
        }


@dataclass(frozen=True)
class SimilarityHit:
    record: EmbeddingRecord
    score: float


@dataclass(frozen=True)
class QueryFilter:
    """Retrieval filter. ``max_episode`` excludes records from later
    episodes (inclusive bound); ``before_episode`` is the strict variant.
    Records without an episode pass both bounds."""

    series: SeriesId | None = None
    target_kind: str | None = None
    exclude_arc_id: str | None = None
    max_episode: EpisodeKey | None = None
    before_episode: EpisodeKey | None = None

    def matches(self, record: EmbeddingRecord) -> bool:
        if self.series is not None and record.series != self.series:
            return False
        if self.target_kind is not None and record.target_kind != self.target_kind:
            return False
        if self.exclude_arc_id is not None:
            if record.arc_id == self.exclude_arc_id or record.target_id == self.exclude_arc_id:
                return False
        if record.episode is not None:
            key = (record.episode.season, record.episode.episode)
            if self.max_episode is not None and key > (self.max_episode.season, self.max_episode.episode):
                return False
            if self.before_episode is not None and key >= (self.before_episode.season, self.before_episode.episode):
                return False
        return True


def _normalize(vector: Sequence[float], dimension: int) -> tuple[float, ...]:
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != dimension:
        raise DimensionMismatchError(f"expected dimension {dimension}, got shape {arr.shape}")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ZeroVectorError("cannot store a zero vector")
    return tuple((arr / norm).tolist())


class VectorStore:
    """All vectors share one dimension and are L2-normalized on write.

    Upserts are idempotent on (target_kind, target_id); retrieval ties are
    broken by record_id ascending.
    """

    def __init__(self, dimension: int, embedder=None):
        if dimension < 2:
            raise VectorStoreError("vector dimension must be >= 2")
        self.dimension = dimension
        self.embedder = embedder
        self._records: dict[str, EmbeddingRecord] = {}
        self._by_target: dict[tuple[str, str], str] = {}

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> list[EmbeddingRecord]:
        return [self._records[rid] for rid in sorted(self._records)]

    def get(self, record_id: str) -> EmbeddingRecord | None:
        return self._records.get(record_id)

    def upsert(self, record: EmbeddingRecord) -> str:
        normalized = replace(record, vector=_normalize(record.vector, self.dimension))
        key = (record.target_kind, record.target_id)
        existing_id = self._by_target.get(key)
        if existing_id is not None and existing_id != normalized.record_id:
            del self._records[existing_id]
        self._by_target[key] = normalized.record_id
        self._records[normalized.record_id] = normalized
        return normalized.record_id

    def delete_target(self, target_kind: str, target_id: str) -> bool:
        record_id = self._by_target.pop((target_kind, target_id), None)
        if record_id is None:
            return False
        del self._records[record_id]
        return True

    def delete_arc(self, arc_id: str) -> int:
        doomed = [r for r in self._records.values() if r.arc_id == arc_id or r.target_id == arc_id]
        for record in doomed:
            self._by_target.pop((record.target_kind, record.target_id), None)
            del self._records[record.record_id]
        return len(doomed)

    def query_similar(
        self,
        query: str | Sequence[float],
        k: int,
        filter: QueryFilter | None = None,
    ) -> list[SimilarityHit]:
        """Top-k by cosine over records passing the filter; exhaustive scan.

        An empty store yields an empty list. Text queries require an
        embedder."""
        if k < 1:
            raise VectorStoreError("k must be >= 1")
        if isinstance(query, str):
            if self.embedder is None:
                raise VectorStoreError("text queries require an embedding provider")
            vector = self.embedder.embed([query])[0]
        else:
            vector = query
        q = np.asarray(_normalize(vector, self.dimension), dtype=np.float64)

        candidates = [r for r in self._records.values() if filter is None or filter.matches(r)]
        if not candidates:
            return []
        matrix = np.asarray([r.vector for r in candidates], dtype=np.float64)
        scores = matrix @ q
        order = sorted(range(len(candidates)), key=lambda i: (-scores[i], candidates[i].record_id))
        return [
            SimilarityHit(record=candidates[i], score=float(np.clip(scores[i], -1.0, 1.0)))
            for i in order[:k]
        ]

    # -- persistence ------------------------------------------------------

    def save(self, meta_path: str | Path, data_path: str | Path) -> None:
        meta_path, data_path = Path(meta_path), Path(data_path)
        meta_path.parent.mkdir(parents=True, exist_ok=True)
        data_path.parent.mkdir(parents=True, exist_ok=True)
        ordered = self.records()
        lines = []
        for record in ordered:
            meta = record.to_meta()
            lines.append(json.dumps(meta, ensure_ascii=False, sort_keys=True))
        header = json.dumps({"dimension": self.dimension, "count": len(ordered)}, sort_keys=True)
        meta_path.write_text("\n".join([header, *lines]) + "\n", "utf-8")
        packed = np.asarray([r.vector for r in ordered], dtype="<f4")
        data_path.write_bytes(packed.tobytes())

    @classmethod
    def load(cls, meta_path: str | Path, data_path: str | Path, embedder=None) -> "VectorStore":
        meta_path, data_path = Path(meta_path), Path(data_path)
        text = meta_path.read_text("utf-8").splitlines()
        header = json.loads(text[0])
        store = cls(dimension=header["dimension"], embedder=embedder)
        raw = np.frombuffer(data_path.read_bytes(), dtype="<f4").reshape(header["count"], header["dimension"])
        for line, row in zip(text[1:], raw):
            meta = json.loads(line)
            record = EmbeddingRecord(
                record_id=meta["record_id"],
                target_kind=meta["target_kind"],
                target_id=meta["target_id"],
                series=SeriesId(meta["series"]),
                episode=EpisodeKey.from_json(meta["episode"]) if meta["episode"] else None,
                arc_id=meta.get("arc_id"),
                text=meta["text"],
                vector=tuple(float(x) for x in row),
            )
            store.upsert(record)
        return store
