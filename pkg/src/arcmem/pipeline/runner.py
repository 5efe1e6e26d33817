"""Episode orchestration: strict ordering, agent sequencing, checkpoints.

Episodes within a season run strictly in order (earlier episodes must be
consolidated into memory first). A failed run leaves a resumable checkpoint
after the last completed agent; a completed episode is a no-op until
forced.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from ..model import EpisodeKey, SeriesId
from ..preprocess.documents import list_documents, load_document
from .agents import (
    PipelineContext,
    agent1_identify_existing,
    agent2_extract_anthology,
    agent3_extract_serial,
    agent4_optimize_season,
    agent5_deduplicate,
    agent6_enhance_details,
    agent7_verify_progressions,
    agent8_verify_roles,
    agent9_final_review_and_commit,
)
from .drafts import (
    AgentTraceEntry,
    ArcDraft,
    EpisodeExtractionResult,
    FlaggedArc,
    OrderingError,
    PipelineError,
)

AGENT_SEQUENCE = [f"agent{i}" for i in range(1, 10)]

EventCallback = Callable[[dict], None]


@dataclass
class _RunState:
    flagged: list[FlaggedArc]
    drafts: list[ArcDraft]
    completed: list[str]

    def to_json(self) -> dict:
        return {
            "flagged": [f.to_json() for f in self.flagged],
            "drafts": [d.to_json() for d in self.drafts],
            "completed": list(self.completed),
        }

    @classmethod
    def from_json(cls, data: dict) -> "_RunState":
        return cls(
            flagged=[FlaggedArc.from_json(f) for f in data["flagged"]],
            drafts=[ArcDraft.from_json(d) for d in data["drafts"]],
            completed=list(data["completed"]),
        )


def checkpoint_path(runs_dir: str | Path, series: SeriesId, episode: EpisodeKey) -> Path:
    return Path(runs_dir) / series.name / f"{episode}.checkpoint.json"


def result_path(runs_dir: str | Path, series: SeriesId, episode: EpisodeKey) -> Path:
    return Path(runs_dir) / series.name / f"{episode}.result.json"


def run_episode(
    ctx: PipelineContext,
    runs_dir: str | Path,
    episodes_dir: str | Path,
    force: bool = False,
    on_event: EventCallback | None = None,
) -> EpisodeExtractionResult:
    """Run agents 1-9 for one episode and persist the outcome.

    Preconditions: the episode document is normalized and every staged
    earlier episode of the same season is already processed.
    """
    emit = on_event or (lambda event: None)
    series, episode = ctx.series, ctx.episode
    ctx.doc.require_status("normalized")

    prior = ctx.stores.relational.processed_result(series, episode)
    if prior is not None and not force:
        result = EpisodeExtractionResult.from_json({**prior, "no_op": True})
        emit({"event": "episode_skipped", "episode": str(episode), "reason": "already processed"})
        return result

    _check_ordering(ctx, episodes_dir)

    if force:
        ctx.stores.relational.clear_processed(series, episode)
        cp = checkpoint_path(runs_dir, series, episode)
        if cp.exists():
            cp.unlink()

    state, start_index = _load_checkpoint(ctx, runs_dir)
    steps = _agent_steps()
    for agent_name, step in steps[start_index:]:
        trace_mark = len(ctx.trace)
        try:
            step(ctx, state)
        except Exception:
            # A failed attempt leaves no trace entry; the resumed run's does.
            del ctx.trace[trace_mark:]
            _save_checkpoint(ctx, runs_dir, state)
            emit({"event": "agent_failed", "agent": agent_name, "episode": str(episode)})
            raise
        state.completed.append(agent_name)
        _save_checkpoint(ctx, runs_dir, state)
        emit(
            {
                "event": "agent_completed",
                "agent": agent_name,
                "episode": str(episode),
                "drafts": len(state.drafts),
            }
        )

    committed, new_count, linked_count = state.commit_outcome  # type: ignore[attr-defined]
    result = EpisodeExtractionResult(
        episode=episode,
        committed_arcs=tuple(committed),
        new_arcs=new_count,
        continued_arcs=linked_count,
        agent_trace=tuple(ctx.trace),
    )
    _persist_result(ctx, runs_dir, result)
    emit(
        {
            "event": "episode_completed",
            "episode": str(episode),
            "committed_arcs": list(result.committed_arcs),
            "new_arcs": result.new_arcs,
            "continued_arcs": result.continued_arcs,
        }
    )
    return result


def _agent_steps():
    def run1(ctx, state):
        state.flagged = agent1_identify_existing(ctx)

    def run2(ctx, state):
        state.drafts = state.drafts + agent2_extract_anthology(ctx)

    def run3(ctx, state):
        state.drafts = state.drafts + agent3_extract_serial(ctx, state.flagged)

    def run4(ctx, state):
        state.drafts = agent4_optimize_season(ctx, state.drafts)

    def run5(ctx, state):
        state.drafts = agent5_deduplicate(ctx, state.drafts)

    def run6(ctx, state):
        state.drafts = agent6_enhance_details(ctx, state.drafts)

    def run7(ctx, state):
        state.drafts = agent7_verify_progressions(ctx, state.drafts)

    def run8(ctx, state):
        state.drafts = agent8_verify_roles(ctx, state.drafts)

    def run9(ctx, state):
        state.commit_outcome = agent9_final_review_and_commit(ctx, state.drafts)

    return list(zip(AGENT_SEQUENCE, [run1, run2, run3, run4, run5, run6, run7, run8, run9]))


def _check_ordering(ctx: PipelineContext, episodes_dir: str | Path) -> None:
    staged = list_documents(episodes_dir, ctx.series)
    earlier = [
        key
        for key in staged
        if key.season == ctx.episode.season and (key.season, key.episode) < (ctx.episode.season, ctx.episode.episode)
    ]
    processed = set(ctx.stores.relational.processed_episodes(ctx.series, season=ctx.episode.season))
    missing = [key for key in earlier if key not in processed]
    if missing:
        raise OrderingError(
            f"cannot process {ctx.episode} before earlier episodes: "
            + ", ".join(str(k) for k in missing)
        )


def _load_checkpoint(ctx: PipelineContext, runs_dir: str | Path) -> tuple[_RunState, int]:
    path = checkpoint_path(runs_dir, ctx.series, ctx.episode)
    if path.exists():
        data = json.loads(path.read_text("utf-8"))
        state = _RunState.from_json(data["state"])
        ctx.trace.extend(AgentTraceEntry.from_json(t) for t in data["trace"])
        completed = len(state.completed)
        if completed >= len(AGENT_SEQUENCE):
            raise PipelineError(f"checkpoint for {ctx.episode} is already complete; use force")
        return state, completed
    return _RunState(flagged=[], drafts=[], completed=[]), 0


def _save_checkpoint(ctx: PipelineContext, runs_dir: str | Path, state: _RunState) -> Path:
    path = checkpoint_path(runs_dir, ctx.series, ctx.episode)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"state": state.to_json(), "trace": [t.to_json() for t in ctx.trace]}
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", "utf-8")
    return path


def _persist_result(ctx: PipelineContext, runs_dir: str | Path, result: EpisodeExtractionResult) -> None:
    ctx.stores.relational.mark_processed(ctx.series, ctx.episode, result.to_json())
    path = result_path(runs_dir, ctx.series, ctx.episode)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result.to_json(), indent=2, ensure_ascii=False) + "\n", "utf-8")
    cp = checkpoint_path(runs_dir, ctx.series, ctx.episode)
    if cp.exists():
        cp.unlink()
    ctx.stores.flush()


def run_season(
    series: SeriesId,
    season: int,
    stores,
    gateway,
    config,
    mode: str | None = None,
    force: bool = False,
    on_event: EventCallback | None = None,
    episode: int | None = None,
) -> list[EpisodeExtractionResult]:
    """Run every staged episode of a season in order (or one episode)."""
    keys = [k for k in list_documents(config.episodes_dir, series) if k.season == season]
    if episode is not None:
        keys = [k for k in keys if k.episode == episode]
        if not keys:
            raise PipelineError(f"no staged document for S{season:02d}E{episode:02d}")
    results = []
    for key in keys:
        doc = load_document(config.episodes_dir, series, key)
        ctx = PipelineContext(
            series=series,
            episode=key,
            doc=doc,
            stores=stores,
            gateway=gateway,
            config=config,
            mode=mode,
        )
        results.append(
            run_episode(
                ctx,
                runs_dir=config.runs_dir,
                episodes_dir=config.episodes_dir,
                force=force,
                on_event=on_event,
            )
        )
    return results
