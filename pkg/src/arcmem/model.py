"""Core domain model: series, episodes, characters, arcs, progressions.

Everything here is a plain value type with canonical JSON forms. Identifiers
are deterministic content hashes so that scripted pipeline runs are
byte-reproducible.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "SeriesId",
    "EpisodeKey",
    "ArcType",
    "Character",
    "Utterance",
    "Progression",
    "NarrativeArc",
    "Violation",
    "ModelError",
    "validate_arc",
    "compare_episodes",
    "derive_id",
]

_SLUG_RE = re.compile(r"^[a-z0-9]+(-[a-z0-9]+)*$")
_ID_KINDS = ("arc", "progression", "character")

# Utterances are pronoun-resolved memory units; these mark unresolved refs.
_THIRD_PERSON_RE = re.compile(
    r"\b(he|him|his|she|her|hers|they|them|their|theirs|himself|herself|themselves)\b",
    re.IGNORECASE,
)


class ModelError(ValueError):
    """Raised when a value type is constructed from invalid data."""


@dataclass(frozen=True, order=True)
class SeriesId:
    """Slug identifying one series; stable across a run."""

    name: str

    def __post_init__(self) -> None:
        if not self.name or not _SLUG_RE.match(self.name):
            raise ModelError(f"series id must be a lowercase hyphenated slug, got {self.name!r}")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class EpisodeKey:
    """Season/episode pair, totally ordered by (season, episode)."""

    season: int
    episode: int

    def __post_init__(self) -> None:
        if self.season < 1 or self.episode < 1:
            raise ModelError(f"season and episode must be >= 1, got {self.season}/{self.episode}")

    def __str__(self) -> str:
        # Zero-padded to two digits; wider numbers widen naturally.
        return f"S{self.season:02d}E{self.episode:02d}"

    @classmethod
    def parse(cls, text: str) -> "EpisodeKey":
        m = re.fullmatch(r"[Ss](\d+)[Ee](\d+)", text.strip())
        if not m:
            raise ModelError(f"not an episode key: {text!r}")
        return cls(season=int(m.group(1)), episode=int(m.group(2)))

    def to_json(self) -> dict:
        return {"season": self.season, "episode": self.episode}

    @classmethod
    def from_json(cls, data: dict) -> "EpisodeKey":
        return cls(season=data["season"], episode=data["episode"])


def compare_episodes(a: EpisodeKey, b: EpisodeKey) -> int:
    """Total order on episode keys: -1, 0 or 1 as a <, ==, > b."""
    ka, kb = (a.season, a.episode), (b.season, b.episode)
    return (ka > kb) - (ka < kb)


class ArcType(str, Enum):
    """The three storyline kinds; a closed enumeration."""

    ANTHOLOGY = "anthology"
    SOAP = "soap"
    GENRE_SPECIFIC = "genre_specific"

    @classmethod
    def parse(cls, text: str) -> "ArcType":
        normalized = text.strip().lower().replace("-", "_").replace(" ", "_")
        for member in cls:
            if member.value == normalized:
                return member
        raise ModelError(f"unknown arc type: {text!r}")


def normalize_appellation(surface: str) -> str:
    """Comparison form of an appellation: trimmed, case-folded, single-spaced."""
    return re.sub(r"\s+", " ", surface.strip()).casefold()


@dataclass(frozen=True)
class Character:
    """Canonical entity: preferred name plus alternative appellations.

    The stored appellations keep their original casing; comparison is
    case-insensitive and whitespace-trimmed.
    """

    character_id: str
    series: SeriesId
    preferred_name: str
    appellations: frozenset[str]

    def __post_init__(self) -> None:
        if not self.preferred_name.strip():
            raise ModelError("preferred_name must be non-empty")
        if any(not a.strip() for a in self.appellations):
            raise ModelError("appellations must be non-empty strings")
        normalized = {normalize_appellation(a) for a in self.appellations}
        if normalize_appellation(self.preferred_name) not in normalized:
            raise ModelError("preferred_name must be one of the appellations")

    def normalized_appellations(self) -> set[str]:
        return {normalize_appellation(a) for a in self.appellations}

    def to_json(self) -> dict:
        return {
            "character_id": self.character_id,
            "series": self.series.name,
            "preferred_name": self.preferred_name,
            "appellations": sorted(self.appellations),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Character":
        return cls(
            character_id=data["character_id"],
            series=SeriesId(data["series"]),
            preferred_name=data["preferred_name"],
            appellations=frozenset(data["appellations"]),
        )


@dataclass(frozen=True)
class Utterance:
    """One declarative sentence; the atomic unit a progression is made of."""

    ordinal: int
    text: str

    def __post_init__(self) -> None:
        if self.ordinal < 0:
            raise ModelError("utterance ordinal must be >= 0")
        if not self.text.strip():
            raise ModelError("utterance text must be non-empty")


@dataclass(frozen=True)
class Progression:
    """An arc's development within one episode: ordered utterances plus
    the characters interfering with the arc in that episode."""

    progression_id: str
    arc_id: str
    series: SeriesId
    episode: EpisodeKey
    content: tuple[Utterance, ...]
    interfering_characters: tuple[str, ...] = ()

    @classmethod
    def build(
        cls,
        progression_id: str,
        arc_id: str,
        series: SeriesId,
        episode: EpisodeKey,
        utterances: list[str],
        interfering_characters: list[str] | tuple[str, ...] = (),
    ) -> "Progression":
        content = tuple(Utterance(ordinal=i, text=t) for i, t in enumerate(utterances))
        return cls(
            progression_id=progression_id,
            arc_id=arc_id,
            series=series,
            episode=episode,
            content=content,
            interfering_characters=tuple(interfering_characters),
        )

    def utterance_texts(self) -> list[str]:
        return [u.text for u in self.content]

    def to_json(self) -> dict:
        # Utterances serialize as an array of strings; ordinal is positional.
        return {
            "progression_id": self.progression_id,
            "arc_id": self.arc_id,
            "series": self.series.name,
            "episode": self.episode.to_json(),
            "content": self.utterance_texts(),
            "interfering_characters": list(self.interfering_characters),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Progression":
        return cls.build(
            progression_id=data["progression_id"],
            arc_id=data["arc_id"],
            series=SeriesId(data["series"]),
            episode=EpisodeKey.from_json(data["episode"]),
            utterances=list(data["content"]),
            interfering_characters=list(data.get("interfering_characters", [])),
        )


@dataclass(frozen=True)
class NarrativeArc:
    """A titled, typed storyline with main characters and per-episode
    progressions, kept sorted by episode."""

    arc_id: str
    series: SeriesId
    title: str
    description: str
    arc_type: ArcType
    main_characters: tuple[str, ...]
    progressions: tuple[Progression, ...] = ()

    def summary_text(self) -> str:
        """The text embedded for this arc (title joined with description)."""
        return f"{self.title} — {self.description}"

    def episodes(self) -> list[EpisodeKey]:
        return [p.episode for p in self.progressions]

    def progression_for(self, episode: EpisodeKey) -> Progression | None:
        for p in self.progressions:
            if p.episode == episode:
                return p
        return None

    def with_progressions(self, progressions: list[Progression]) -> "NarrativeArc":
        ordered = tuple(sorted(progressions, key=lambda p: (p.episode.season, p.episode.episode)))
        return NarrativeArc(
            arc_id=self.arc_id,
            series=self.series,
            title=self.title,
            description=self.description,
            arc_type=self.arc_type,
            main_characters=self.main_characters,
            progressions=ordered,
        )

    def to_json(self) -> dict:
        return {
            "arc_id": self.arc_id,
            "series": self.series.name,
            "title": self.title,
            "description": self.description,
            "arc_type": self.arc_type.value,
            "main_characters": list(self.main_characters),
            "progressions": [p.to_json() for p in self.progressions],
        }

    @classmethod
    def from_json(cls, data: dict) -> "NarrativeArc":
        return cls(
            arc_id=data["arc_id"],
            series=SeriesId(data["series"]),
            title=data["title"],
            description=data["description"],
            arc_type=ArcType.parse(data["arc_type"]),
            main_characters=tuple(data["main_characters"]),
            progressions=tuple(Progression.from_json(p) for p in data["progressions"]),
        )


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by validate_arc; data, not a fault."""

    code: str
    message: str


def validate_arc(arc: NarrativeArc, known_character_ids: set[str] | None = None) -> list[Violation]:
    """Check every arc invariant; an empty report means the arc is valid.

    When ``known_character_ids`` is given, character references are checked
    against it; otherwise referential checks are skipped (the relational
    store enforces them on save).
    """
    violations: list[Violation] = []

    if not arc.title.strip():
        violations.append(Violation("EMPTY_TITLE", "arc title is empty"))
    if not arc.description.strip():
        violations.append(Violation("EMPTY_DESCRIPTION", "arc description is empty"))
    if not arc.main_characters:
        violations.append(Violation("NO_MAIN_CHARACTERS", "arc has no main characters"))

    episode_keys = [p.episode for p in arc.progressions]
    if arc.arc_type is ArcType.ANTHOLOGY and len(set(episode_keys)) > 1:
        episodes = ", ".join(str(e) for e in sorted(set(episode_keys)))
        violations.append(
            Violation(
                "ANTHOLOGY_MULTI_EPISODE",
                f"anthology arc spans multiple episodes: {episodes}",
            )
        )

    seen: set[EpisodeKey] = set()
    for p in arc.progressions:
        if p.episode in seen:
            violations.append(
                Violation(
                    "DUPLICATE_EPISODE_PROGRESSION",
                    f"more than one progression for episode {p.episode}",
                )
            )
        seen.add(p.episode)
        if p.arc_id != arc.arc_id:
            violations.append(
                Violation("FOREIGN_PROGRESSION", f"progression {p.progression_id} references arc {p.arc_id}")
            )
        if not p.content:
            violations.append(
                Violation("EMPTY_PROGRESSION_CONTENT", f"progression for {p.episode} has no utterances")
            )
        ordinals = [u.ordinal for u in p.content]
        if ordinals != list(range(len(ordinals))):
            violations.append(
                Violation("BAD_UTTERANCE_ORDINALS", f"progression for {p.episode} has gapped ordinals")
            )
        for u in p.content:
            if _THIRD_PERSON_RE.search(u.text):
                violations.append(
                    Violation(
                        "UNRESOLVED_PRONOUN",
                        f"utterance {u.ordinal} of {p.episode} still contains a third-person pronoun",
                    )
                )

    if episode_keys != sorted(episode_keys, key=lambda e: (e.season, e.episode)):
        violations.append(Violation("UNSORTED_PROGRESSIONS", "progressions are not sorted by episode"))

    if known_character_ids is not None:
        referenced = set(arc.main_characters)
        for p in arc.progressions:
            referenced.update(p.interfering_characters)
        for cid in sorted(referenced - known_character_ids):
            violations.append(Violation("UNKNOWN_CHARACTER", f"unknown character id {cid}"))

    return violations


def derive_id(kind: str, series: SeriesId, discriminator: str) -> str:
    """Deterministic opaque id: a content hash of kind + series + discriminator."""
    if kind not in _ID_KINDS:
        raise ModelError(f"unknown id kind: {kind!r}")
    if not discriminator:
        raise ModelError("discriminator must be non-empty")
    digest = hashlib.sha256(f"{kind}\x1f{series.name}\x1f{discriminator}".encode("utf-8")).hexdigest()
    return f"{kind}-{digest[:16]}"
