"""HTTP surface for curation and batch operation.

All responses are JSON. Mutations re-validate and re-embed affected arcs;
error bodies carry machine-readable violation codes.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from ..config import AppConfig
from ..gateway import LlmGateway, ProviderUnavailableError
from ..model import (
    ArcType,
    Character,
    EpisodeKey,
    ModelError,
    NarrativeArc,
    Progression,
    SeriesId,
    derive_id,
    validate_arc,
)
from ..pipeline import run_season
from ..preprocess import load_document
from ..preprocess.documents import PreprocessError
from ..preprocess.entities import suggest_duplicate_characters
from ..store import (
    AppellationCollisionError,
    MemoryStores,
    MergeConflictError,
    StoreError,
    UnknownIdError,
    cluster_embeddings,
    pca_project_3d,
)
from .runs import RunConflictError, RunRegistry
from .runtime import build_gateway, build_stores


class ArcCreate(BaseModel):
    series: str
    title: str
    description: str
    arc_type: str
    main_characters: list[str] = Field(default_factory=list)
    progressions: list[dict] = Field(default_factory=list)


class ArcPatch(BaseModel):
    title: str | None = None
    description: str | None = None
    arc_type: str | None = None
    main_characters: list[str] | None = None


class ArcMergeRequest(BaseModel):
    keep_id: str
    absorb_id: str


class ProgressionCreate(BaseModel):
    episode: dict
    content: list[str]
    interfering_characters: list[str] = Field(default_factory=list)


class ProgressionPatch(BaseModel):
    content: list[str] | None = None
    interfering_characters: list[str] | None = None


class GenerateProgressionRequest(BaseModel):
    episode: dict


class CharacterPatch(BaseModel):
    preferred_name: str | None = None
    appellations: list[str] | None = None


class CharacterMergeRequest(BaseModel):
    keep_id: str
    drop_id: str


class PipelineRunRequest(BaseModel):
    series: str
    season: int
    mode: str | None = None
    force: bool = False


def _violations_error(violations) -> HTTPException:
    return HTTPException(
        status_code=400,
        detail={
            "error": "VALIDATION",
            "violations": [{"code": v.code, "message": v.message} for v in violations],
        },
    )


def create_app(
    config: AppConfig,
    stores: MemoryStores | None = None,
    gateway: LlmGateway | None = None,
) -> FastAPI:
    app = FastAPI(title="arcmem", version="0.1.0")
    # The console may be served from another origin (dev server, file host);
    # the API is single-user and unauthenticated, so allow any origin.
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    state = app.state
    state.config = config
    state.stores = stores if stores is not None else build_stores(config)
    state.gateway = gateway if gateway is not None else build_gateway(config)
    state.runs = RunRegistry()

    def memory() -> MemoryStores:
        return state.stores

    # -- error mapping -------------------------------------------------------------

    @app.exception_handler(UnknownIdError)
    async def unknown_id(request: Request, exc: UnknownIdError):
        return JSONResponse(status_code=404, content={"error": "UNKNOWN_ID", "message": str(exc)})

    @app.exception_handler(MergeConflictError)
    async def merge_conflict(request: Request, exc: MergeConflictError):
        return JSONResponse(
            status_code=409,
            content={
                "error": "MERGE_CONFLICT",
                "violations": [{"code": v.code, "message": v.message} for v in exc.violations],
            },
        )

    @app.exception_handler(AppellationCollisionError)
    async def appellation_conflict(request: Request, exc: AppellationCollisionError):
        return JSONResponse(status_code=409, content={"error": exc.code, "message": str(exc)})

    @app.exception_handler(RunConflictError)
    async def run_conflict(request: Request, exc: RunConflictError):
        return JSONResponse(status_code=409, content={"error": exc.code, "message": str(exc)})

    @app.exception_handler(ProviderUnavailableError)
    async def provider_unavailable(request: Request, exc: ProviderUnavailableError):
        return JSONResponse(status_code=503, content={"error": exc.code, "message": str(exc)})

    @app.exception_handler(ModelError)
    async def model_error(request: Request, exc: ModelError):
        return JSONResponse(status_code=400, content={"error": "INVALID", "message": str(exc)})

    @app.exception_handler(StoreError)
    async def store_error(request: Request, exc: StoreError):
        return JSONResponse(status_code=400, content={"error": exc.code, "message": str(exc)})

    # -- series and timeline ----------------------------------------------------------

    @app.get("/api/series")
    def list_series():
        rows = memory().relational._conn.execute(
            "SELECT DISTINCT series FROM characters UNION SELECT DISTINCT series FROM arcs"
        ).fetchall()
        return {"series": sorted({r[0] for r in rows})}

    @app.get("/api/series/{series}/seasons/{season}/arcs")
    def timeline(series: str, season: int, type: str | None = None, character: str | None = None):
        sid = SeriesId(series)
        arc_type = ArcType.parse(type) if type else None
        arcs = memory().relational.list_arcs(sid, arc_type=arc_type, character=character)
        in_season = [a for a in arcs if any(p.episode.season == season for p in a.progressions)]
        episodes = sorted({p.episode for a in in_season for p in a.progressions if p.episode.season == season})
        return {
            "series": series,
            "season": season,
            "episodes": [str(e) for e in episodes],
            "arcs": [a.to_json() for a in in_season],
        }

    # -- arcs -----------------------------------------------------------------------------

    def _save_validated(arc: NarrativeArc) -> NarrativeArc:
        known = {c.character_id for c in memory().relational.list_characters(arc.series)}
        violations = validate_arc(arc, known_character_ids=known)
        if violations:
            raise _violations_error(violations)
        memory().save_arc(arc)
        memory().flush()
        return arc

    @app.get("/api/arcs/{arc_id}")
    def get_arc(arc_id: str):
        return memory().relational.load_arc(arc_id).to_json()

    @app.post("/api/arcs", status_code=201)
    def create_arc(body: ArcCreate):
        series = SeriesId(body.series)
        arc_id = derive_id("arc", series, body.title or "untitled")
        try:
            memory().relational.load_arc(arc_id)
        except UnknownIdError:
            pass
        else:
            raise HTTPException(status_code=409, detail={"error": "ARC_EXISTS", "arc_id": arc_id})
        progressions = [
            Progression.build(
                progression_id=derive_id("progression", series, f"{arc_id}:{EpisodeKey.from_json(p['episode'])}"),
                arc_id=arc_id,
                series=series,
                episode=EpisodeKey.from_json(p["episode"]),
                utterances=list(p.get("content", [])),
                interfering_characters=list(p.get("interfering_characters", [])),
            )
            for p in body.progressions
        ]
        arc = NarrativeArc(
            arc_id=arc_id,
            series=series,
            title=body.title,
            description=body.description,
            arc_type=ArcType.parse(body.arc_type) if body.arc_type else ArcType.SOAP,
            main_characters=tuple(body.main_characters),
            progressions=(),
        ).with_progressions(progressions)
        return _save_validated(arc).to_json()

    @app.patch("/api/arcs/{arc_id}")
    def patch_arc(arc_id: str, body: ArcPatch):
        arc = memory().relational.load_arc(arc_id)
        updated = NarrativeArc(
            arc_id=arc.arc_id,
            series=arc.series,
            title=body.title if body.title is not None else arc.title,
            description=body.description if body.description is not None else arc.description,
            arc_type=ArcType.parse(body.arc_type) if body.arc_type is not None else arc.arc_type,
            main_characters=tuple(body.main_characters) if body.main_characters is not None else arc.main_characters,
            progressions=arc.progressions,
        )
        return _save_validated(updated).to_json()

    @app.delete("/api/arcs/{arc_id}", status_code=204)
    def delete_arc(arc_id: str):
        memory().relational.load_arc(arc_id)  # 404 before mutation
        memory().delete_arc(arc_id)
        memory().flush()

    @app.post("/api/arcs/merge")
    def merge_arcs(body: ArcMergeRequest):
        merged = memory().merge_arcs(body.keep_id, body.absorb_id)
        memory().flush()
        return merged.to_json()

    # -- progressions --------------------------------------------------------------------------

    @app.post("/api/arcs/{arc_id}/progressions", status_code=201)
    def add_progression(arc_id: str, body: ProgressionCreate):
        arc = memory().relational.load_arc(arc_id)
        episode = EpisodeKey.from_json(body.episode)
        progression = Progression.build(
            progression_id=derive_id("progression", arc.series, f"{arc_id}:{episode}"),
            arc_id=arc_id,
            series=arc.series,
            episode=episode,
            utterances=body.content,
            interfering_characters=body.interfering_characters,
        )
        updated = arc.with_progressions([*arc.progressions, progression])
        return _save_validated(updated).to_json()

    @app.patch("/api/arcs/{arc_id}/progressions/{progression_id}")
    def patch_progression(arc_id: str, progression_id: str, body: ProgressionPatch):
        arc = memory().relational.load_arc(arc_id)
        target = next((p for p in arc.progressions if p.progression_id == progression_id), None)
        if target is None:
            raise UnknownIdError(f"unknown progression id: {progression_id}")
        texts = body.content if body.content is not None else target.utterance_texts()
        interfering = (
            body.interfering_characters
            if body.interfering_characters is not None
            else list(target.interfering_characters)
        )
        rebuilt = Progression.build(
            progression_id=target.progression_id,
            arc_id=arc_id,
            series=arc.series,
            episode=target.episode,
            utterances=texts,
            interfering_characters=interfering,
        )
        others = [p for p in arc.progressions if p.progression_id != progression_id]
        return _save_validated(arc.with_progressions([*others, rebuilt])).to_json()

    @app.delete("/api/arcs/{arc_id}/progressions/{progression_id}")
    def delete_progression(arc_id: str, progression_id: str):
        arc = memory().relational.load_arc(arc_id)
        if all(p.progression_id != progression_id for p in arc.progressions):
            raise UnknownIdError(f"unknown progression id: {progression_id}")
        remaining = [p for p in arc.progressions if p.progression_id != progression_id]
        return _save_validated(arc.with_progressions(remaining)).to_json()

    @app.post("/api/arcs/{arc_id}/progressions/generate")
    def generate_progression(arc_id: str, body: GenerateProgressionRequest):
        """LLM-drafted progression for human review; nothing is saved."""
        arc = memory().relational.load_arc(arc_id)
        episode = EpisodeKey.from_json(body.episode)
        try:
            doc = load_document(state.config.episodes_dir, arc.series, episode)
        except PreprocessError as exc:
            raise HTTPException(status_code=400, detail={"error": "NO_DOCUMENT", "message": str(exc)})
        if doc.status != "normalized":
            raise HTTPException(status_code=400, detail={"error": "DOCUMENT_NOT_READY", "message": doc.status})
        parsed = state.gateway.complete_structured(
            "generate_progression",
            {
                "title": arc.title,
                "arc_type": arc.arc_type.value,
                "description": arc.description,
                "episode": str(episode),
                "plot": "\n".join(doc.normalized),
            },
        )
        return {
            "arc_id": arc_id,
            "episode": episode.to_json(),
            "content": parsed["utterances"],
            "interfering_characters": parsed["interfering_characters"],
        }

    # -- embedding analytics --------------------------------------------------------------------

    def _summary_records(series: SeriesId):
        records = [
            r
            for r in memory().vectors.records()
            if r.series == series and r.target_kind == "arc_summary"
        ]
        titles = {}
        for r in records:
            try:
                titles[r.record_id] = memory().relational.load_arc(r.target_id).title
            except UnknownIdError:
                titles[r.record_id] = r.text
        return records, titles

    @app.get("/api/series/{series}/clusters")
    def clusters(series: str, threshold: float | None = Query(default=None)):
        sid = SeriesId(series)
        value = threshold if threshold is not None else state.config.cluster_distance_threshold
        records, titles = _summary_records(sid)
        assignments = cluster_embeddings(records, distance_threshold=value)
        by_id = {r.record_id: r for r in records}
        return {
            "threshold": value,
            "clusters": [
                {
                    "cluster_id": c.cluster_id,
                    "member_ids": list(c.member_ids),
                    "members": [
                        {
                            "record_id": m,
                            "arc_id": by_id[m].target_id,
                            "title": titles[m],
                        }
                        for m in c.member_ids
                    ],
                }
                for c in assignments
            ],
        }

    @app.get("/api/series/{series}/pca")
    def pca(series: str):
        sid = SeriesId(series)
        records, titles = _summary_records(sid)
        if not records:
            return {"points": []}
        coords = pca_project_3d(records)
        by_id = {r.record_id: r for r in records}
        return {
            "points": [
                {
                    "record_id": rid,
                    "arc_id": by_id[rid].target_id,
                    "title": titles[rid],
                    "x": x,
                    "y": y,
                    "z": z,
                }
                for rid, x, y, z in coords
            ]
        }

    # -- characters -------------------------------------------------------------------------------

    @app.get("/api/series/{series}/characters")
    def list_characters(series: str):
        return {"characters": [c.to_json() for c in memory().relational.list_characters(SeriesId(series))]}

    @app.patch("/api/characters/{character_id}")
    def patch_character(character_id: str, body: CharacterPatch):
        current = memory().relational.get_character(character_id)
        preferred = body.preferred_name if body.preferred_name is not None else current.preferred_name
        appellations = set(body.appellations) if body.appellations is not None else set(current.appellations)
        appellations.add(preferred)
        updated = Character(
            character_id=current.character_id,
            series=current.series,
            preferred_name=preferred,
            appellations=frozenset(appellations),
        )
        memory().relational.save_character(updated)
        return updated.to_json()

    @app.post("/api/characters/merge")
    def merge_characters(body: CharacterMergeRequest):
        merged = memory().merge_characters(body.keep_id, body.drop_id)
        memory().flush()
        return merged.to_json()

    @app.get("/api/series/{series}/characters/duplicates")
    def duplicate_characters(series: str, threshold: float | None = Query(default=None)):
        sid = SeriesId(series)
        value = threshold if threshold is not None else state.config.jaccard_threshold
        characters = memory().relational.list_characters(sid)
        by_id = {c.character_id: c for c in characters}
        pairs = suggest_duplicate_characters(characters, threshold=value)
        return {
            "threshold": value,
            "pairs": [
                {
                    "a": {"character_id": a, "preferred_name": by_id[a].preferred_name},
                    "b": {"character_id": b, "preferred_name": by_id[b].preferred_name},
                    "score": score,
                }
                for a, b, score in pairs
            ],
        }

    # -- pipeline runs -------------------------------------------------------------------------------

    @app.post("/api/pipeline/run", status_code=202)
    def start_run(body: PipelineRunRequest):
        series = SeriesId(body.series)

        def work(handle):
            run_season(
                series=series,
                season=body.season,
                stores=memory(),
                gateway=state.gateway,
                config=state.config,
                mode=body.mode,
                force=body.force,
                on_event=handle.emit,
            )

        handle = state.runs.start(body.series, body.season, work)
        return {"run_id": handle.run_id}

    @app.get("/api/pipeline/runs/{run_id}")
    def run_status(run_id: str):
        handle = state.runs.get(run_id)
        if handle is None:
            raise UnknownIdError(f"unknown run id: {run_id}")
        return handle.status()

    @app.get("/api/pipeline/runs/{run_id}/events")
    def run_events(run_id: str):
        handle = state.runs.get(run_id)
        if handle is None:
            raise UnknownIdError(f"unknown run id: {run_id}")

        def stream():
            for event in handle.stream():
                yield json.dumps(event, ensure_ascii=False) + "\n"

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    # -- static frontend (when built) ------------------------------------------------------------------

    frontend_dist = Path(__file__).resolve().parents[4] / "frontend" / "dist"
    if frontend_dist.exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(frontend_dist), html=True), name="ui")

    return app
