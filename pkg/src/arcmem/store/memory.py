"""Combined long-term memory: relational rows plus their embeddings.

Every arc mutation that goes through this facade keeps the vector store in
sync (arc summary and one record per progression; utterance records only
when enabled).
"""

from __future__ import annotations

import hashlib
from pathlib import Path

from ..model import NarrativeArc, SeriesId, Violation, derive_id, validate_arc
from .relational import RelationalStore, StoreError
from .vectors import EmbeddingRecord, VectorStore


class MergeConflictError(StoreError):
    code = "MERGE_CONFLICT"

    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(f"{v.code}: {v.message}" for v in violations))
        self.violations = violations


def embedding_record_id(target_kind: str, target_id: str) -> str:
    digest = hashlib.sha256(f"{target_kind}\x1f{target_id}".encode("utf-8")).hexdigest()
    return f"emb-{digest[:16]}"


class MemoryStores:
    """Relational store + vector store + embedder, kept consistent."""

    def __init__(
        self,
        relational: RelationalStore,
        vectors: VectorStore,
        embed_utterances: bool = False,
    ):
        self.relational = relational
        self.vectors = vectors
        self.embed_utterances = embed_utterances
        self._vector_paths: tuple[Path, Path] | None = None

    @classmethod
    def open(
        cls,
        db_path: str | Path,
        vectors_meta_path: str | Path,
        vectors_data_path: str | Path,
        embedder,
        embed_utterances: bool = False,
    ) -> "MemoryStores":
        relational = RelationalStore(db_path)
        meta, data = Path(vectors_meta_path), Path(vectors_data_path)
        if meta.exists() and data.exists():
            vectors = VectorStore.load(meta, data, embedder=embedder)
        else:
            vectors = VectorStore(dimension=embedder.dimension, embedder=embedder)
        stores = cls(relational, vectors, embed_utterances=embed_utterances)
        stores._vector_paths = (meta, data)
        return stores

    def flush(self) -> None:
        if self._vector_paths is not None:
            self.vectors.save(*self._vector_paths)

    def close(self) -> None:
        self.flush()
        self.relational.close()

    # -- arcs -----------------------------------------------------------------

    def save_arc(self, arc: NarrativeArc) -> None:
        """Persist the aggregate and refresh all of its embeddings."""
        self.relational.save_arc(arc)
        self.vectors.delete_arc(arc.arc_id)
        self._embed_arc(arc)

    def _embed_arc(self, arc: NarrativeArc) -> None:
        embedder = self.vectors.embedder
        if embedder is None:
            raise StoreError("vector store has no embedding provider")
        first_episode = arc.progressions[0].episode if arc.progressions else None
        summary = EmbeddingRecord(
            record_id=embedding_record_id("arc_summary", arc.arc_id),
            target_kind="arc_summary",
            target_id=arc.arc_id,
            series=arc.series,
            episode=first_episode,
            arc_id=arc.arc_id,
            text=arc.summary_text(),
            vector=tuple(embedder.embed([arc.summary_text()])[0]),
        )
        self.vectors.upsert(summary)
        for p in arc.progressions:
            text = " ".join(p.utterance_texts())
            self.vectors.upsert(
                EmbeddingRecord(
                    record_id=embedding_record_id("progression", p.progression_id),
                    target_kind="progression",
                    target_id=p.progression_id,
                    series=arc.series,
                    episode=p.episode,
                    arc_id=arc.arc_id,
                    text=text,
                    vector=tuple(embedder.embed([text])[0]),
                )
            )
            if self.embed_utterances:
                for u in p.content:
                    target = f"{p.progression_id}#{u.ordinal}"
                    self.vectors.upsert(
                        EmbeddingRecord(
                            record_id=embedding_record_id("utterance", target),
                            target_kind="utterance",
                            target_id=target,
                            series=arc.series,
                            episode=p.episode,
                            arc_id=arc.arc_id,
                            text=u.text,
                            vector=tuple(embedder.embed([u.text])[0]),
                        )
                    )

    def delete_arc(self, arc_id: str) -> None:
        """Cascade: relational rows and every embedding of the arc."""
        self.relational.delete_arc(arc_id)
        self.vectors.delete_arc(arc_id)

    def merge_arcs(self, keep_id: str, absorb_id: str) -> NarrativeArc:
        """Merge absorb into keep: union progressions (same-episode conflicts
        concatenate utterances, keep's first), union characters, delete the
        absorbed arc, refresh embeddings. Rejected wholesale if the merged
        arc would be invalid."""
        if keep_id == absorb_id:
            raise StoreError("cannot merge an arc into itself")
        keep = self.relational.load_arc(keep_id)
        absorb = self.relational.load_arc(absorb_id)
        if keep.series != absorb.series:
            raise StoreError("cannot merge arcs from different series")

        by_episode = {p.episode: p for p in keep.progressions}
        for p in absorb.progressions:
            if p.episode in by_episode:
                ours = by_episode[p.episode]
                texts = ours.utterance_texts() + p.utterance_texts()
                interfering = list(dict.fromkeys([*ours.interfering_characters, *p.interfering_characters]))
            else:
                texts = p.utterance_texts()
                interfering = list(p.interfering_characters)
            by_episode[p.episode] = _rebuilt_progression(keep, p.episode, texts, interfering)
        # Re-derive ids for keep's own progressions too, so ids follow one rule.
        for episode, p in list(by_episode.items()):
            by_episode[episode] = _rebuilt_progression(
                keep, episode, p.utterance_texts(), list(p.interfering_characters)
            )

        main = list(dict.fromkeys([*keep.main_characters, *absorb.main_characters]))
        merged = NarrativeArc(
            arc_id=keep.arc_id,
            series=keep.series,
            title=keep.title,
            description=keep.description,
            arc_type=keep.arc_type,
            main_characters=tuple(main),
            progressions=(),
        ).with_progressions(list(by_episode.values()))

        violations = validate_arc(merged)
        if violations:
            raise MergeConflictError(violations)

        self.delete_arc(absorb_id)
        self.save_arc(merged)
        return merged

    # -- characters -------------------------------------------------------------

    def merge_characters(self, keep_id: str, drop_id: str):
        """Embeddings are untouched: arc texts reference names, not ids."""
        return self.relational.merge_characters(keep_id, drop_id)

    # -- integrity ----------------------------------------------------------------

    def validate_all(self, series: SeriesId) -> dict[str, list[Violation]]:
        report = {}
        for arc_id in self.relational.list_arc_ids(series):
            arc = self.relational.load_arc(arc_id)
            known = {c.character_id for c in self.relational.list_characters(series)}
            violations = validate_arc(arc, known_character_ids=known)
            if violations:
                report[arc_id] = violations
        return report


def _rebuilt_progression(arc: NarrativeArc, episode, texts: list[str], interfering: list[str]):
    from ..model import Progression

    pid = derive_id("progression", arc.series, f"{arc.arc_id}:{episode}")
    return Progression.build(
        progression_id=pid,
        arc_id=arc.arc_id,
        series=arc.series,
        episode=episode,
        utterances=texts,
        interfering_characters=interfering,
    )
