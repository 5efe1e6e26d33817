"""The nine-agent extraction workflow plus the semantic commit step.

Agents run strictly in order over one episode. Retrieval-facing agents see
only records from earlier episodes; gateway-facing agents log every request
fingerprint into the episode trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..config import AppConfig
from ..gateway import LlmGateway
from ..model import (
    ArcType,
    EpisodeKey,
    NarrativeArc,
    Progression,
    SeriesId,
    derive_id,
    validate_arc,
)
from ..preprocess.documents import EpisodeDocument
from ..store import MemoryStores, QueryFilter, StoreError
from .drafts import AgentTraceEntry, ArcDraft, FlaggedArc, PipelineError


@dataclass
class PipelineContext:
    """Everything one episode run needs, plus the trace being built."""

    series: SeriesId
    episode: EpisodeKey
    doc: EpisodeDocument
    stores: MemoryStores
    gateway: LlmGateway
    config: AppConfig
    mode: str | None = None
    trace: list[AgentTraceEntry] = field(default_factory=list)
    _current: AgentTraceEntry | None = None

    def begin_agent(self, agent: str) -> AgentTraceEntry:
        entry = AgentTraceEntry(agent=agent)
        self.trace.append(entry)
        self._current = entry
        return entry

    def call(self, template_id: str, variables: dict[str, str]):
        """Gateway call recorded in the current agent's trace."""
        key = self.gateway.fingerprint_for(template_id, variables)
        if self._current is not None:
            self._current.fingerprints.append(key)
        return self.gateway.complete_structured(template_id, variables, mode=self.mode)

    @property
    def plot_text(self) -> str:
        return "\n".join(self.doc.normalized)


def render_drafts(drafts: list[ArcDraft]) -> str:
    """Numbered draft list as prompt input. Labeled one-field-per-line so
    titles containing punctuation stay unambiguous."""
    if not drafts:
        return "(none)"
    lines = []
    for i, d in enumerate(drafts):
        flags = f" [{', '.join(sorted(d.flags))}]" if d.flags else ""
        lines.append(f"{i}. title: {d.title}")
        lines.append(f"   type: {d.arc_type.value}{flags}")
        lines.append(f"   description: {d.description}")
        if d.main_characters:
            lines.append(f"   main: {', '.join(d.main_characters)}")
        if d.interfering_characters:
            lines.append(f"   interfering: {', '.join(d.interfering_characters)}")
        for text in d.progression_content:
            lines.append(f"   - {text}")
    return "\n".join(lines)


def render_flagged(flagged: list[FlaggedArc]) -> str:
    if not flagged:
        return "(none)"
    lines = []
    for f in flagged:
        lines.append(f"- arc_id: {f.arc.arc_id}")
        lines.append(f"  type: {f.arc.arc_type.value}")
        lines.append(f"  title: {f.arc.title}")
        lines.append(f"  description: {f.arc.description}")
    return "\n".join(lines)


# -- agent 1: existing season arcs identifier ---------------------------------------


def agent1_identify_existing(ctx: PipelineContext) -> list[FlaggedArc]:
    """Query episodic memory with the episode text (full plot plus sentence
    chunks) and flag stored arcs scoring at or above the flag threshold.
    Only records from strictly earlier episodes are visible."""
    entry = ctx.begin_agent("agent1")
    sentences = list(ctx.doc.normalized)
    queries = ["\n".join(sentences)]
    chunk = ctx.config.agent1_chunk_sentences
    for start in range(0, len(sentences), chunk):
        queries.append(" ".join(sentences[start : start + chunk]))

    query_filter = QueryFilter(
        series=ctx.series,
        target_kind="arc_summary",
        before_episode=ctx.episode,
    )
    best: dict[str, float] = {}
    retrieved: list[dict] = []
    for query in queries:
        hits = ctx.stores.vectors.query_similar(query, k=10, filter=query_filter)
        retrieved.append(
            [
                {
                    "record_id": h.record.record_id,
                    "target_id": h.record.target_id,
                    "episode": str(h.record.episode) if h.record.episode else None,
                    "score": round(h.score, 6),
                }
                for h in hits
            ]
        )
        for h in hits:
            arc_id = h.record.target_id
            if h.score > best.get(arc_id, -2.0):
                best[arc_id] = h.score

    flagged = [
        FlaggedArc(arc=ctx.stores.relational.load_arc(arc_id), score=score)
        for arc_id, score in sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
        if score >= ctx.config.flag_threshold
    ]
    entry.notes = {
        "queries": len(queries),
        "retrieved": retrieved,
        "flagged": [{"arc_id": f.arc.arc_id, "score": round(f.score, 6)} for f in flagged],
    }
    return flagged


# -- agents 2 and 3: extraction -------------------------------------------------------


def agent2_extract_anthology(ctx: PipelineContext) -> list[ArcDraft]:
    ctx.begin_agent("agent2")
    parsed = ctx.call("agent2_anthology", {"episode": str(ctx.episode), "plot": ctx.plot_text})
    return [
        ArcDraft(
            provisional_id=f"{ctx.episode}-agent2-{i}",
            title=item["title"],
            description=item["description"],
            arc_type=ArcType.ANTHOLOGY,
            origin="agent2",
        )
        for i, item in enumerate(parsed["arcs"])
    ]


def agent3_extract_serial(ctx: PipelineContext, flagged: list[FlaggedArc]) -> list[ArcDraft]:
    """New soap / genre-specific drafts, plus a present/absent verdict for
    every arc flagged by agent 1. Present arcs become validated drafts that
    keep the stored arc's identity."""
    entry = ctx.begin_agent("agent3")
    parsed = ctx.call(
        "agent3_serial",
        {
            "episode": str(ctx.episode),
            "plot": ctx.plot_text,
            "flagged_arcs": render_flagged(flagged),
        },
    )
    drafts = [
        ArcDraft(
            provisional_id=f"{ctx.episode}-agent3-{i}",
            title=item["title"],
            description=item["description"],
            arc_type=ArcType.parse(item["arc_type"]),
            origin="agent3_new",
        )
        for i, item in enumerate(parsed["new_arcs"])
    ]

    flagged_by_id = {f.arc.arc_id: f for f in flagged}
    verdicts = {v["arc_id"]: bool(v["present"]) for v in parsed["validations"]}
    unknown = sorted(set(verdicts) - set(flagged_by_id))
    validated = []
    for arc_id, f in flagged_by_id.items():
        if verdicts.get(arc_id, False):
            validated.append(
                ArcDraft(
                    provisional_id=f"{ctx.episode}-agent3-validated-{arc_id}",
                    title=f.arc.title,
                    description=f.arc.description,
                    arc_type=f.arc.arc_type,
                    origin="agent3_validated",
                    flags=frozenset({"possibly_present"}),
                    existing_arc_id=arc_id,
                )
            )
    entry.notes = {
        "new": len(drafts),
        "validated": [d.existing_arc_id for d in validated],
        "dropped_flags": sorted(set(flagged_by_id) - {d.existing_arc_id for d in validated}),
        "unknown_validations": unknown,
    }
    return drafts + validated


# -- agents 4 and 5: consolidation ------------------------------------------------------


def agent4_optimize_season(ctx: PipelineContext, drafts: list[ArcDraft]) -> list[ArcDraft]:
    """Merge overlapping serial drafts; anthology drafts pass through."""
    entry = ctx.begin_agent("agent4")
    serial_indices = [i for i, d in enumerate(drafts) if d.arc_type is not ArcType.ANTHOLOGY]
    if len(serial_indices) < 2:
        entry.notes = {"merges": [], "skipped": "fewer than two serial drafts"}
        return list(drafts)

    serial = [drafts[i] for i in serial_indices]
    parsed = ctx.call("agent4_optimize", {"episode": str(ctx.episode), "drafts": render_drafts(serial)})

    consumed: set[int] = set()
    merged_at: dict[int, ArcDraft] = {}
    applied = []
    for merge in parsed["merges"]:
        indices = sorted(set(i for i in merge["indices"] if 0 <= i < len(serial)))
        if len(indices) < 2 or any(i in consumed for i in indices):
            continue
        members = [serial[i] for i in indices]
        merged_at[indices[0]] = _merge_drafts(
            members,
            provisional_id=f"{ctx.episode}-agent4-merge-{indices[0]}",
            title=merge["title"],
            description=merge["description"],
        )
        consumed.update(indices)
        applied.append(indices)

    out: list[ArcDraft] = []
    serial_pos = 0
    for i, draft in enumerate(drafts):
        if i not in serial_indices:
            out.append(draft)
            continue
        if serial_pos in merged_at:
            out.append(merged_at[serial_pos])
        elif serial_pos not in consumed:
            out.append(draft)
        serial_pos += 1
    entry.notes = {"merges": applied, "drafts_in": len(drafts), "drafts_out": len(out)}
    return out


def _merge_drafts(members: list[ArcDraft], provisional_id: str, title: str, description: str) -> ArcDraft:
    """Merged draft keeps the lowest-indexed member's type and any carried
    arc identity; characters are unioned."""
    main = list(dict.fromkeys(n for d in members for n in d.main_characters))
    interfering = list(dict.fromkeys(n for d in members for n in d.interfering_characters))
    existing = next((d.existing_arc_id for d in members if d.existing_arc_id), None)
    flags = frozenset().union(*(d.flags for d in members))
    return ArcDraft(
        provisional_id=provisional_id,
        title=title,
        description=description,
        arc_type=members[0].arc_type,
        origin="merged",
        main_characters=tuple(main),
        interfering_characters=tuple(interfering),
        flags=flags,
        existing_arc_id=existing,
    )


def agent5_deduplicate(ctx: PipelineContext, drafts: list[ArcDraft]) -> list[ArcDraft]:
    """Resolve cross-type duplicates (one story drafted under two types)."""
    entry = ctx.begin_agent("agent5")
    if len(drafts) < 2:
        entry.notes = {"duplicates": [], "skipped": "fewer than two drafts"}
        return list(drafts)
    parsed = ctx.call("agent5_deduplicate", {"episode": str(ctx.episode), "drafts": render_drafts(drafts)})

    dropped: set[int] = set()
    survivors = list(drafts)
    applied = []
    for pair in parsed["duplicates"]:
        i, j = sorted(set(pair["indices"]))[:2] if len(set(pair["indices"])) >= 2 else (None, None)
        if i is None or not (0 <= i < len(drafts)) or not (0 <= j < len(drafts)):
            continue
        if i in dropped or j in dropped:
            continue
        keep_type = ArcType.parse(pair["keep_type"])
        if keep_type not in (drafts[i].arc_type, drafts[j].arc_type):
            keep_type = drafts[i].arc_type  # repair: closed choice
        merged = _merge_drafts(
            [drafts[i], drafts[j]],
            provisional_id=f"{ctx.episode}-agent5-{i}",
            title=drafts[i].title,
            description=drafts[i].description,
        ).update(arc_type=keep_type)
        survivors[i] = merged
        dropped.add(j)
        applied.append([i, j])
    out = [d for idx, d in enumerate(survivors) if idx not in dropped]
    entry.notes = {"duplicates": applied, "drafts_in": len(drafts), "drafts_out": len(out)}
    return out


# -- agents 6 to 8: enrichment and verification ---------------------------------------------


def agent6_enhance_details(ctx: PipelineContext, drafts: list[ArcDraft]) -> list[ArcDraft]:
    """Each draft gains main characters, interfering characters, and its
    progression utterances for this episode. Names that resolve to no stored
    character land in the unresolved-names report."""
    entry = ctx.begin_agent("agent6")
    unresolved: dict[str, list[str]] = {}
    out = []
    for draft in drafts:
        parsed = ctx.call(
            "agent6_enhance",
            {
                "episode": str(ctx.episode),
                "plot": ctx.plot_text,
                "title": draft.title,
                "description": draft.description,
                "arc_type": draft.arc_type.value,
            },
        )
        main = list(dict.fromkeys(parsed["main_characters"]))
        interfering = [n for n in dict.fromkeys(parsed["interfering_characters"]) if n not in main]
        missing = [
            name
            for name in main + interfering
            if ctx.stores.relational.find_character_by_appellation(ctx.series, name) is None
        ]
        if missing:
            unresolved[draft.provisional_id] = missing
        if not main:
            raise PipelineError(f"agent6 left draft {draft.provisional_id!r} without main characters")
        out.append(
            draft.update(
                main_characters=tuple(main),
                interfering_characters=tuple(interfering),
                progression_content=tuple(parsed["utterances"]),
            )
        )
    entry.notes = {"unresolved_names": unresolved}
    return out


def agent7_verify_progressions(ctx: PipelineContext, drafts: list[ArcDraft]) -> list[ArcDraft]:
    """Drop utterances irrelevant to each draft's storyline; a draft whose
    content empties is dropped with a trace note."""
    entry = ctx.begin_agent("agent7")
    emptied = []
    out = []
    for draft in drafts:
        numbered = "\n".join(f"{i}. {text}" for i, text in enumerate(draft.progression_content))
        parsed = ctx.call(
            "agent7_verify_progressions",
            {"title": draft.title, "description": draft.description, "utterances": numbered},
        )
        keep = [i for i in dict.fromkeys(parsed["keep"]) if 0 <= i < len(draft.progression_content)]
        keep.sort()
        content = tuple(draft.progression_content[i] for i in keep)
        if not content:
            emptied.append(draft.provisional_id)
            continue
        out.append(draft.update(progression_content=content))
    entry.notes = {"VERIFIER_EMPTIED": emptied} if emptied else {"VERIFIER_EMPTIED": []}
    return out


def agent8_verify_roles(ctx: PipelineContext, drafts: list[ArcDraft]) -> list[ArcDraft]:
    """Adjudicate main vs interfering. The sets stay disjoint and main stays
    non-empty, repairing the model's output when necessary."""
    entry = ctx.begin_agent("agent8")
    repairs = []
    out = []
    for draft in drafts:
        parsed = ctx.call(
            "agent8_verify_roles",
            {
                "title": draft.title,
                "description": draft.description,
                "utterances": "\n".join(draft.progression_content),
                "main_characters": ", ".join(draft.main_characters) or "(none)",
                "interfering_characters": ", ".join(draft.interfering_characters) or "(none)",
            },
        )
        main = list(dict.fromkeys(parsed["main_characters"]))
        interfering = [n for n in dict.fromkeys(parsed["interfering_characters"]) if n not in main]
        if len(interfering) != len(parsed["interfering_characters"]):
            repairs.append({"draft": draft.provisional_id, "repair": "overlap removed from interfering"})
        if not main:
            main = list(draft.main_characters)
            repairs.append({"draft": draft.provisional_id, "repair": "kept previous main characters"})
        out.append(draft.update(main_characters=tuple(main), interfering_characters=tuple(interfering)))
    entry.notes = {"repairs": repairs}
    return out


# -- agent 9 and commit ------------------------------------------------------------------------


def agent9_final_review_and_commit(ctx: PipelineContext, drafts: list[ArcDraft]) -> tuple[list[str], int, int]:
    """Final consistency pass, then each approved draft goes through the
    semantic commit. Returns (committed arc ids, new count, linked count)."""
    entry = ctx.begin_agent("agent9")
    approved_indices = list(range(len(drafts)))
    if drafts:
        parsed = ctx.call(
            "agent9_final_review", {"episode": str(ctx.episode), "drafts": render_drafts(drafts)}
        )
        approved_indices = sorted(i for i in set(parsed["approved"]) if 0 <= i < len(drafts))
    committed: list[str] = []
    commits: list[dict] = []
    failed: list[dict] = []
    new_count = 0
    linked_count = 0
    for index in approved_indices:
        draft = drafts[index]
        try:
            outcome, arc_id = semantic_commit(ctx, draft)
        except StoreError as exc:
            # A storage failure rolls back only the in-flight draft.
            failed.append({"draft": draft.provisional_id, "error": str(exc)})
            continue
        committed.append(arc_id)
        commits.append(
            {
                "draft": draft.provisional_id,
                "outcome": outcome,
                "arc_id": arc_id,
                "utterances": len(draft.progression_content),
            }
        )
        if outcome == "created":
            new_count += 1
        else:
            linked_count += 1
    entry.notes.update(
        {
            "approved": approved_indices,
            "rejected": sorted(set(range(len(drafts))) - set(approved_indices)),
            "commits": commits,
            "failed_commits": failed,
        }
    )
    return committed, new_count, linked_count


def _resolve_names(ctx: PipelineContext, names: tuple[str, ...]) -> list[str]:
    ids = []
    for name in names:
        character = ctx.stores.relational.find_character_by_appellation(ctx.series, name)
        if character is not None and character.character_id not in ids:
            ids.append(character.character_id)
    return ids


def _unique_arc_id(ctx: PipelineContext, title: str) -> str:
    discriminator = title
    arc_id = derive_id("arc", ctx.series, discriminator)
    suffix = 0
    while _arc_exists(ctx, arc_id):
        suffix += 1
        discriminator = f"{title}|{ctx.episode}" if suffix == 1 else f"{title}|{ctx.episode}|{suffix}"
        arc_id = derive_id("arc", ctx.series, discriminator)
    return arc_id


def _arc_exists(ctx: PipelineContext, arc_id: str) -> bool:
    try:
        ctx.stores.relational.load_arc(arc_id)
        return True
    except Exception:
        return False


def semantic_commit(ctx: PipelineContext, draft: ArcDraft) -> tuple[str, str]:
    """Link the draft to an existing arc or create a new one.

    Validated continuations link straight to their arc. Anything else is
    embedded and compared against stored arc summaries; every hit at or
    above the dedup threshold is adjudicated by the same-storyline prompt,
    and the first affirmative wins. Similarity alone never links.
    """
    main_ids = _resolve_names(ctx, draft.main_characters)
    interfering_ids = [
        cid for cid in _resolve_names(ctx, draft.interfering_characters) if cid not in main_ids
    ]
    if not main_ids:
        raise PipelineError(f"draft {draft.provisional_id!r} has no resolvable main characters")
    if not draft.progression_content:
        raise PipelineError(f"draft {draft.provisional_id!r} has no progression content")

    if draft.existing_arc_id is not None:
        arc = ctx.stores.relational.load_arc(draft.existing_arc_id)
        updated = _linked_arc(ctx, arc, draft)
        violations = validate_arc(updated)
        if violations:
            raise PipelineError(
                f"continuation of {arc.arc_id} is invalid: "
                + "; ".join(v.code for v in violations)
            )
        ctx.stores.save_arc(updated)
        return "linked", arc.arc_id

    summary = f"{draft.title} — {draft.description}"
    vector = ctx.stores.vectors.embedder.embed([summary])[0]
    hits = ctx.stores.vectors.query_similar(
        vector,
        k=10,
        filter=QueryFilter(series=ctx.series, target_kind="arc_summary"),
    )
    adjudications = []
    linked_arc: NarrativeArc | None = None
    for hit in hits:
        if hit.score < ctx.config.dedup_threshold:
            break
        candidate = ctx.stores.relational.load_arc(hit.record.target_id)
        parsed = ctx.call(
            "same_storyline",
            {
                "existing": f"({candidate.arc_type.value}) {candidate.summary_text()}",
                "candidate": f"({draft.arc_type.value}) {summary}",
            },
        )
        verdict = bool(parsed["same_storyline"])
        adjudications.append({"arc_id": candidate.arc_id, "score": round(hit.score, 6), "same": verdict})
        if not verdict:
            continue
        updated = _linked_arc(ctx, candidate, draft)
        if validate_arc(updated):
            adjudications[-1]["link_rejected"] = "validate_arc"
            continue
        linked_arc = updated
        break

    if ctx._current is not None and adjudications:
        ctx._current.notes.setdefault("adjudications", []).extend(adjudications)

    if linked_arc is not None:
        ctx.stores.save_arc(linked_arc)
        return "linked", linked_arc.arc_id

    arc_id = _unique_arc_id(ctx, draft.title)
    progression = Progression.build(
        progression_id=derive_id("progression", ctx.series, f"{arc_id}:{ctx.episode}"),
        arc_id=arc_id,
        series=ctx.series,
        episode=ctx.episode,
        utterances=list(draft.progression_content),
        interfering_characters=interfering_ids,
    )
    arc = NarrativeArc(
        arc_id=arc_id,
        series=ctx.series,
        title=draft.title,
        description=draft.description,
        arc_type=draft.arc_type,
        main_characters=tuple(main_ids),
        progressions=(progression,),
    )
    violations = validate_arc(arc)
    if violations:
        raise PipelineError(
            f"draft {draft.provisional_id!r} builds an invalid arc: " + "; ".join(v.code for v in violations)
        )
    ctx.stores.save_arc(arc)
    return "created", arc_id


def _linked_arc(ctx: PipelineContext, arc: NarrativeArc, draft: ArcDraft) -> NarrativeArc:
    """Append this episode's progression to an existing arc. The stored
    title, description, type, and main cast stay as they are; a same-episode
    progression (possible only on forced reruns) concatenates utterances."""
    interfering_ids = [
        cid
        for cid in _resolve_names(ctx, draft.interfering_characters)
        if cid not in arc.main_characters
    ]
    existing = arc.progression_for(ctx.episode)
    texts = list(draft.progression_content)
    if existing is not None and existing.utterance_texts() != texts:
        texts = existing.utterance_texts() + texts
        interfering_ids = list(dict.fromkeys([*existing.interfering_characters, *interfering_ids]))
    progression = Progression.build(
        progression_id=derive_id("progression", ctx.series, f"{arc.arc_id}:{ctx.episode}"),
        arc_id=arc.arc_id,
        series=ctx.series,
        episode=ctx.episode,
        utterances=texts,
        interfering_characters=interfering_ids,
    )
    others = [p for p in arc.progressions if p.episode != ctx.episode]
    return arc.with_progressions([*others, progression])
