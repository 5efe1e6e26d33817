"""Character entities: mention detection, normalization, name substitution,
and duplicate suggestion.

Mention detection is pluggable: the offline default is a capitalization
heuristic; an LLM refinement pass then groups surface variants and drops
non-character hits.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

from ..gateway import LlmGateway
from ..model import Character, SeriesId, derive_id, normalize_appellation
from ..store.analytics import jaccard_similarity
from ..store.relational import RelationalStore
from .documents import EpisodeDocument, MentionCandidate, PreprocessError

# Capitalized words that never belong to a person-name run.
_STOPWORDS = {
    "A", "An", "The", "It", "He", "She", "They", "His", "Her", "Their",
    "At", "In", "On", "By", "For", "With", "When", "While", "After", "Before",
    "But", "And", "Or", "Then", "Later", "Meanwhile", "During", "That", "This",
    "Everyone", "Someone", "Nobody", "If", "As", "So", "Once", "Now", "Soon",
}

_HONORIFIC_TOKENS = {"dr", "mr", "mrs", "ms"}

_CAP_TOKEN_RE = re.compile(r"^[A-Z][a-z]+(?:'[a-z]+)?$")
_WORD_RE = re.compile(r"[A-Za-z]+(?:'[a-z]+)?\.?|\S")


class CharacterConflictError(PreprocessError):
    code = "CONFLICT"


@dataclass(frozen=True)
class ProtoEntity:
    """Grouped surface forms believed to denote one character."""

    surfaces: tuple[str, ...]

    def longest_surface(self) -> str:
        return sorted(self.surfaces, key=lambda s: (-len(s), s))[0]


@dataclass(frozen=True)
class EntityExtraction:
    candidates: tuple[MentionCandidate, ...]
    proto_entities: tuple[ProtoEntity, ...]


class MentionProvider(Protocol):
    name: str

    def person_mentions(self, sentences: Sequence[str]) -> list[MentionCandidate]: ...


class HeuristicMentionProvider:
    """Offline default: maximal runs of capitalized words, with sentence-initial
    single tokens kept only when the same token also appears mid-sentence."""

    name = "heuristic"

    def person_mentions(self, sentences: Sequence[str]) -> list[MentionCandidate]:
        raw: list[tuple[str, int, bool]] = []  # surface, sentence index, sentence-initial
        for index, sentence in enumerate(sentences):
            tokens = _WORD_RE.findall(sentence)
            run: list[str] = []
            run_start_token = 0
            for t_index, token in enumerate(tokens):
                bare = token.rstrip(".")
                if bare.endswith("'s"):
                    bare = bare[:-2]
                if _CAP_TOKEN_RE.match(bare) and bare not in _STOPWORDS:
                    if not run:
                        run_start_token = t_index
                    run.append(bare)
                else:
                    if run:
                        raw.append((" ".join(run), index, run_start_token == 0))
                        run = []
            if run:
                raw.append((" ".join(run), index, run_start_token == 0))

        midsentence_tokens = {
            token for surface, _, initial in raw if not initial for token in surface.split()
        }
        multiword_tokens = {
            token for surface, _, _ in raw if " " in surface for token in surface.split()
        }
        candidates = []
        for surface, index, initial in raw:
            if initial and " " not in surface:
                if surface not in midsentence_tokens and surface not in multiword_tokens:
                    continue
            candidates.append(MentionCandidate(surface=surface, sentence_index=index, source="ner"))
        return candidates


class LlmMentionProvider:
    """Extraction via the entity-refinement prompt over whole sentences."""

    name = "llm"

    def __init__(self, gateway: LlmGateway, episode: str, mode: str | None = None):
        self.gateway = gateway
        self.episode = episode
        self.mode = mode

    def person_mentions(self, sentences: Sequence[str]) -> list[MentionCandidate]:
        heuristic = HeuristicMentionProvider().person_mentions(sentences)
        surfaces = sorted({c.surface for c in heuristic})
        parsed = self.gateway.complete_structured(
            "refine_entities",
            {"episode": self.episode, "candidates": "\n".join(surfaces) if surfaces else "(none)"},
            mode=self.mode,
        )
        kept = {s for group in parsed["characters"] for s in group["surfaces"]}
        return [c for c in heuristic if c.surface in kept]


def extract_entities(
    doc: EpisodeDocument,
    gateway: LlmGateway,
    provider: MentionProvider | None = None,
    mode: str | None = None,
) -> EntityExtraction:
    """Detect person mentions in the resolved sentences, then group variant
    surfaces into proto-entities and drop non-character hits via the
    refinement prompt."""
    doc.require_status("resolved")
    provider = provider or HeuristicMentionProvider()
    candidates = provider.person_mentions(doc.resolved)
    unique_surfaces = sorted({c.surface for c in candidates})
    parsed = gateway.complete_structured(
        "refine_entities",
        {
            "episode": str(doc.episode),
            "candidates": "\n".join(unique_surfaces) if unique_surfaces else "(none)",
        },
        mode=mode,
    )

    sentence_lookup = {c.surface: c.sentence_index for c in sorted(candidates, key=lambda c: -c.sentence_index)}
    kept_candidates: list[MentionCandidate] = []
    protos: list[ProtoEntity] = []
    for group in parsed["characters"]:
        surfaces: list[str] = []
        for surface in group["surfaces"]:
            if surface in sentence_lookup:
                surfaces.append(surface)
            else:
                # Refinement may surface a variant the detector missed, but it
                # must actually occur in the document.
                index = _first_sentence_containing(doc.resolved, surface)
                if index is None:
                    continue
                surfaces.append(surface)
                kept_candidates.append(
                    MentionCandidate(surface=surface, sentence_index=index, source="llm_refinement")
                )
        if surfaces:
            protos.append(ProtoEntity(surfaces=tuple(sorted(set(surfaces), key=lambda s: (-len(s), s)))))

    kept_surfaces = {s for p in protos for s in p.surfaces}
    kept_candidates.extend(c for c in candidates if c.surface in kept_surfaces)
    kept_candidates.sort(key=lambda c: (c.sentence_index, c.surface))
    return EntityExtraction(candidates=tuple(kept_candidates), proto_entities=tuple(protos))


def _first_sentence_containing(sentences: Sequence[str], surface: str) -> int | None:
    pattern = re.compile(rf"\b{re.escape(surface)}\b")
    for index, sentence in enumerate(sentences):
        if pattern.search(sentence):
            return index
    return None


def normalize_characters(
    proto_entities: Iterable[ProtoEntity],
    store: RelationalStore,
    series: SeriesId,
) -> dict[str, str]:
    """Match each proto-entity to the character store (any appellation,
    case-insensitive) or create a new character whose preferred name is the
    longest surface. Returns a surface -> character_id map covering every
    surface seen."""
    protos = sorted(proto_entities, key=lambda p: p.longest_surface())

    claimed: dict[str, ProtoEntity] = {}
    for proto in protos:
        for surface in proto.surfaces:
            norm = normalize_appellation(surface)
            other = claimed.get(norm)
            if other is not None and other is not proto:
                raise CharacterConflictError(
                    f"appellation {surface!r} claimed by two proto-entities: "
                    f"{list(other.surfaces)} and {list(proto.surfaces)}"
                )
            claimed[norm] = proto

    mapping: dict[str, str] = {}
    for proto in protos:
        matches: dict[str, Character] = {}
        for surface in proto.surfaces:
            existing = store.find_character_by_appellation(series, surface)
            if existing is not None:
                matches[existing.character_id] = existing
        if len(matches) > 1:
            names = ", ".join(sorted(c.preferred_name for c in matches.values()))
            raise CharacterConflictError(
                f"proto-entity {list(proto.surfaces)} matches several stored characters: {names}"
            )
        if matches:
            character = next(iter(matches.values()))
            surfaces = frozenset(character.appellations | set(proto.surfaces))
            if surfaces != character.appellations:
                character = Character(
                    character_id=character.character_id,
                    series=series,
                    preferred_name=character.preferred_name,
                    appellations=surfaces,
                )
                store.save_character(character)
        else:
            preferred = proto.longest_surface()
            character = Character(
                character_id=derive_id("character", series, normalize_appellation(preferred)),
                series=series,
                preferred_name=preferred,
                appellations=frozenset(proto.surfaces),
            )
            store.save_character(character)
        for surface in proto.surfaces:
            mapping[surface] = character.character_id
    return mapping


def build_replacements(mapping: dict[str, str], store: RelationalStore) -> dict[str, str]:
    """surface -> preferred name, for substitution."""
    return {surface: store.get_character(cid).preferred_name for surface, cid in mapping.items()}


def substitute_names(doc: EpisodeDocument, replacements: dict[str, str]) -> EpisodeDocument:
    """Longest-match-first replacement of every mapped surface by the
    character's preferred name."""
    doc.require_status("resolved")
    if not replacements:
        return doc.advance("normalized", normalized=doc.resolved)
    pattern = _surface_pattern(replacements)
    normalized = tuple(pattern.sub(lambda m: replacements[m.group(0)], s) for s in doc.resolved)
    return doc.advance("normalized", normalized=normalized)


def _surface_pattern(replacements: dict[str, str]) -> re.Pattern:
    ordered = sorted(replacements, key=lambda s: (-len(s), s))
    return re.compile(r"\b(?:" + "|".join(re.escape(s) for s in ordered) + r")\b")


def unsubstituted_surfaces(text: str, replacements: dict[str, str]) -> set[str]:
    """Mapped surfaces still present outside their replacement names.

    Preferred names are masked first (longest first) so a short surface
    embedded in its own replacement (Frost inside Jerry Frost) does not
    count as a leftover.
    """
    masked = text
    for preferred in sorted(set(replacements.values()), key=lambda s: (-len(s), s)):
        masked = re.sub(rf"\b{re.escape(preferred)}\b", "␀", masked)
    leftovers = set()
    for surface in replacements:
        if re.search(rf"\b{re.escape(surface)}\b", masked):
            leftovers.add(surface)
    return leftovers


def appellation_tokens(character: Character) -> set[str]:
    """Lowercased word tokens across all appellations, honorifics dropped."""
    tokens: set[str] = set()
    for surface in character.appellations:
        for token in re.split(r"[^a-z0-9]+", surface.casefold()):
            if token and token not in _HONORIFIC_TOKENS:
                tokens.add(token)
    return tokens


def suggest_duplicate_characters(
    characters: Sequence[Character],
    threshold: float = 0.5,
) -> list[tuple[str, str, float]]:
    """All unordered character pairs whose appellation token sets reach the
    Jaccard threshold, sorted by score descending."""
    suggestions: list[tuple[str, str, float]] = []
    indexed = sorted(characters, key=lambda c: c.character_id)
    for i, a in enumerate(indexed):
        tokens_a = appellation_tokens(a)
        for b in indexed[i + 1 :]:
            score = jaccard_similarity(tokens_a, appellation_tokens(b))
            if score >= threshold:
                suggestions.append((a.character_id, b.character_id, score))
    suggestions.sort(key=lambda item: (-item[2], item[0], item[1]))
    return suggestions
