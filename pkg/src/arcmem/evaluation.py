"""Evaluation against a human gold standard: arc matching and the
precision / entity-count report.

The gold comparison was a manual judgment originally, so automated matching
is greedy cosine with an overrides file taking absolute precedence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .gateway import EmbeddingProvider
from .model import ArcType, NarrativeArc

DEFAULT_MATCH_THRESHOLD = 0.6


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class GoldArc:
    title: str
    arc_type: ArcType
    episodes: tuple[str, ...] = ()
    main_characters: tuple[str, ...] = ()


@dataclass(frozen=True)
class GoldStandard:
    series: str
    season: int
    gold_arcs: tuple[GoldArc, ...]
    gold_characters: tuple[str, ...]
    # (arc_id, gold index) pins; (arc_id, None) forces unmatched.
    mapping_overrides: tuple[tuple[str, int | None], ...] = ()

    @classmethod
    def from_json(cls, data: dict) -> "GoldStandard":
        overrides = []
        for item in data.get("mapping_overrides", []):
            if item.get("unmatched"):
                overrides.append((item["arc_id"], None))
            else:
                overrides.append((item["arc_id"], int(item["gold_index"])))
        return cls(
            series=data["series"],
            season=data["season"],
            gold_arcs=tuple(
                GoldArc(
                    title=a["title"],
                    arc_type=ArcType.parse(a["arc_type"]),
                    episodes=tuple(a.get("episodes", [])),
                    main_characters=tuple(a.get("main_characters", [])),
                )
                for a in data["gold_arcs"]
            ),
            gold_characters=tuple(data["gold_characters"]),
            mapping_overrides=tuple(overrides),
        )

    @classmethod
    def load(cls, path: str | Path) -> "GoldStandard":
        return cls.from_json(json.loads(Path(path).read_text("utf-8")))


def match_arcs(
    extracted: list[NarrativeArc],
    gold: GoldStandard,
    embedder: EmbeddingProvider,
    threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> dict[str, int]:
    """Greedy best-first one-to-one matching on cosine similarity between
    extracted summary text and gold title. Overrides take absolute
    precedence; the result is a partial injection (arc_id -> gold index)."""
    matching: dict[str, int] = {}
    pinned_unmatched: set[str] = set()
    known_ids = {a.arc_id for a in extracted}
    used_gold: set[int] = set()
    for arc_id, gold_index in gold.mapping_overrides:
        if arc_id not in known_ids:
            raise EvaluationError(f"override references unknown arc id {arc_id}")
        if gold_index is None:
            pinned_unmatched.add(arc_id)
            continue
        if not (0 <= gold_index < len(gold.gold_arcs)):
            raise EvaluationError(f"override references unknown gold index {gold_index}")
        if arc_id in matching or gold_index in used_gold:
            raise EvaluationError(f"conflicting overrides around arc {arc_id} / gold {gold_index}")
        matching[arc_id] = gold_index
        used_gold.add(gold_index)

    if not gold.gold_arcs:
        return matching

    candidates = [a for a in extracted if a.arc_id not in matching and a.arc_id not in pinned_unmatched]
    if candidates:
        texts = [a.summary_text() for a in candidates] + [g.title for g in gold.gold_arcs]
        vectors = embedder.embed(texts)
        arc_vecs = vectors[: len(candidates)]
        gold_vecs = vectors[len(candidates) :]
        pairs = []
        for i, arc in enumerate(candidates):
            for j in range(len(gold.gold_arcs)):
                score = _dot(arc_vecs[i], gold_vecs[j])
                if score >= threshold:
                    pairs.append((-score, arc.arc_id, j))
        pairs.sort()
        for neg_score, arc_id, j in pairs:
            if arc_id in matching or j in used_gold:
                continue
            matching[arc_id] = j
            used_gold.add(j)
    return matching


def _dot(a, b) -> float:
    return sum(x * y for x, y in zip(a, b))


@dataclass(frozen=True)
class TypeReport:
    extracted: int
    correct: int

    @property
    def precision(self) -> float | None:
        return precision(self.extracted, self.correct)

    def to_json(self) -> dict:
        return {"extracted": self.extracted, "correct": self.correct, "precision": self.precision}


def precision(extracted: int, correct: int) -> float | None:
    """correct / extracted, or None (reported as null) with nothing extracted."""
    if extracted == 0:
        return None
    return correct / extracted


@dataclass(frozen=True)
class EvalReport:
    per_type: dict
    characters: dict
    duplication_count: int
    missed_gold: tuple[int, ...]
    matched: int
    unmatched_extracted: int

    def to_json(self) -> dict:
        return {
            "per_type": {k: v.to_json() for k, v in self.per_type.items()},
            "characters": dict(self.characters),
            "duplication_count": self.duplication_count,
            "missed_gold": list(self.missed_gold),
            "matched": self.matched,
            "unmatched_extracted": self.unmatched_extracted,
        }

    def render_table(self) -> str:
        lines = [f"{'type':<16}{'extracted':>10}{'correct':>9}{'precision':>11}"]
        for name, report in self.per_type.items():
            p = report.precision
            lines.append(
                f"{name:<16}{report.extracted:>10}{report.correct:>9}"
                + (f"{p:>11.3f}" if p is not None else f"{'null':>11}")
            )
        c = self.characters
        lines.append(
            f"characters: {c['correct']} of {c['extracted']} correct; "
            f"duplicates flagged: {self.duplication_count}; missed gold arcs: {len(self.missed_gold)}"
        )
        return "\n".join(lines)


def compute_report(
    matching: dict[str, int],
    extracted: list[NarrativeArc],
    gold: GoldStandard,
    extracted_characters: list[str] | None = None,
    duplication_count: int | None = None,
) -> EvalReport:
    """Per-type precision, character accuracy, duplication and missed-gold
    counts. An extracted arc is correct when it matches a gold arc of the
    same type."""
    per_type: dict[str, TypeReport] = {}
    for arc_type in ArcType:
        of_type = [a for a in extracted if a.arc_type is arc_type]
        correct = sum(
            1
            for a in of_type
            if a.arc_id in matching and gold.gold_arcs[matching[a.arc_id]].arc_type is arc_type
        )
        per_type[arc_type.value] = TypeReport(extracted=len(of_type), correct=correct)

    if duplication_count is None:
        duplication_count = _count_duplicates(matching, extracted, gold)

    names = extracted_characters if extracted_characters is not None else []
    folded_gold = {n.casefold() for n in gold.gold_characters}
    correct_names = sum(1 for n in names if n.casefold() in folded_gold)
    characters = {"extracted": len(names), "correct": correct_names}

    matched_gold = set(matching.values())
    missed = tuple(i for i in range(len(gold.gold_arcs)) if i not in matched_gold)
    return EvalReport(
        per_type=per_type,
        characters=characters,
        duplication_count=duplication_count,
        missed_gold=missed,
        matched=len(matching),
        unmatched_extracted=len(extracted) - len(matching),
    )


def _count_duplicates(matching: dict[str, int], extracted: list[NarrativeArc], gold: GoldStandard) -> int:
    """Unmatched extracted arcs whose same-type gold twin was already taken:
    the signature of one storyline extracted twice."""
    count = 0
    matched_gold = set(matching.values())
    for arc in extracted:
        if arc.arc_id in matching:
            continue
        same_type = [i for i, g in enumerate(gold.gold_arcs) if g.arc_type is arc.arc_type]
        if same_type and all(i in matched_gold for i in same_type):
            count += 1
    return count


def counts_report(
    anthology_extracted: int,
    anthology_correct: int,
    characters_extracted: int,
    characters_correct: int,
) -> dict:
    """Metric arithmetic from bare counts (no stores needed)."""
    return {
        "anthology": {
            "extracted": anthology_extracted,
            "correct": anthology_correct,
            "precision": precision(anthology_extracted, anthology_correct),
        },
        "characters": {"extracted": characters_extracted, "correct": characters_correct},
    }
