"""Working-state types for the extraction workflow: drafts, flags, traces."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..model import ArcType, EpisodeKey, NarrativeArc

ORIGINS = ("agent2", "agent3_new", "agent3_validated", "merged")


class PipelineError(Exception):
    code = "PIPELINE_ERROR"


class OrderingError(PipelineError):
    code = "ORDERING"


@dataclass(frozen=True)
class ArcDraft:
    """One storyline being shaped by the agents before commit."""

    provisional_id: str
    title: str
    description: str
    arc_type: ArcType
    origin: str
    main_characters: tuple[str, ...] = ()  # names, resolved to ids at commit
    interfering_characters: tuple[str, ...] = ()
    progression_content: tuple[str, ...] = ()
    flags: frozenset[str] = frozenset()
    existing_arc_id: str | None = None  # carried by validated continuations

    def __post_init__(self) -> None:
        if self.origin not in ORIGINS:
            raise PipelineError(f"unknown draft origin: {self.origin!r}")

    def update(self, **changes) -> "ArcDraft":
        return replace(self, **changes)

    def to_json(self) -> dict:
        return {
            "provisional_id": self.provisional_id,
            "title": self.title,
            "description": self.description,
            "arc_type": self.arc_type.value,
            "origin": self.origin,
            "main_characters": list(self.main_characters),
            "interfering_characters": list(self.interfering_characters),
            "progression_content": list(self.progression_content),
            "flags": sorted(self.flags),
            "existing_arc_id": self.existing_arc_id,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ArcDraft":
        return cls(
            provisional_id=data["provisional_id"],
            title=data["title"],
            description=data["description"],
            arc_type=ArcType.parse(data["arc_type"]),
            origin=data["origin"],
            main_characters=tuple(data["main_characters"]),
            interfering_characters=tuple(data["interfering_characters"]),
            progression_content=tuple(data["progression_content"]),
            flags=frozenset(data["flags"]),
            existing_arc_id=data["existing_arc_id"],
        )


@dataclass(frozen=True)
class FlaggedArc:
    """An existing arc marked possibly present in the current episode."""

    arc: NarrativeArc
    score: float

    def to_json(self) -> dict:
        return {"arc": self.arc.to_json(), "score": self.score}

    @classmethod
    def from_json(cls, data: dict) -> "FlaggedArc":
        return cls(arc=NarrativeArc.from_json(data["arc"]), score=data["score"])


@dataclass
class AgentTraceEntry:
    agent: str
    fingerprints: list[str] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"agent": self.agent, "fingerprints": list(self.fingerprints), "notes": self.notes}

    @classmethod
    def from_json(cls, data: dict) -> "AgentTraceEntry":
        return cls(agent=data["agent"], fingerprints=list(data["fingerprints"]), notes=dict(data["notes"]))


@dataclass(frozen=True)
class EpisodeExtractionResult:
    episode: EpisodeKey
    committed_arcs: tuple[str, ...]
    new_arcs: int
    continued_arcs: int
    agent_trace: tuple[AgentTraceEntry, ...]
    no_op: bool = False

    def __post_init__(self) -> None:
        if not self.no_op and self.new_arcs + self.continued_arcs != len(self.committed_arcs):
            raise PipelineError("new_arcs + continued_arcs must equal committed arc count")

    def to_json(self) -> dict:
        return {
            "episode": self.episode.to_json(),
            "committed_arcs": list(self.committed_arcs),
            "new_arcs": self.new_arcs,
            "continued_arcs": self.continued_arcs,
            "agent_trace": [t.to_json() for t in self.agent_trace],
            "no_op": self.no_op,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EpisodeExtractionResult":
        return cls(
            episode=EpisodeKey.from_json(data["episode"]),
            committed_arcs=tuple(data["committed_arcs"]),
            new_arcs=data["new_arcs"],
            continued_arcs=data["continued_arcs"],
            agent_trace=tuple(AgentTraceEntry.from_json(t) for t in data["agent_trace"]),
            no_op=data.get("no_op", False),
        )
