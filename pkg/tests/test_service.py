from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from arcmem.config import AppConfig
from arcmem.gateway import HashedNgramEmbedder, LlmGateway, NoProvider
from arcmem.model import ArcType, EpisodeKey, NarrativeArc, Progression, derive_id, validate_arc
from arcmem.service import create_app
from arcmem.store import MemoryStores, RelationalStore, VectorStore

from .conftest import SERIES, HandlerProvider, normalized_doc, seed_character


@pytest.fixture
def stores(tmp_path):
    embedder = HashedNgramEmbedder(dimension=128)
    s = MemoryStores(
        RelationalStore(tmp_path / "api.db"),
        VectorStore(dimension=128, embedder=embedder),
    )
    yield s
    s.relational.close()


@pytest.fixture
def client(tmp_path, stores):
    config = AppConfig(workspace=tmp_path / "ws", fixtures_dir=tmp_path / "fx")
    gateway = LlmGateway(tmp_path / "fx", provider=NoProvider(), mode="replay")
    app = create_app(config, stores=stores, gateway=gateway)
    return TestClient(app)


def seed_arc(stores, title, arc_type=ArcType.SOAP, episodes=((1, 1),), main_names=("Lena Vasquez",)):
    main = tuple(
        stores.relational.find_character_by_appellation(SERIES, n).character_id for n in main_names
    )
    arc_id = derive_id("arc", SERIES, title)
    progressions = [
        Progression.build(
            progression_id=derive_id("progression", SERIES, f"{arc_id}:S{s:02d}E{e:02d}"),
            arc_id=arc_id,
            series=SERIES,
            episode=EpisodeKey(s, e),
            utterances=[f"{title} beat one.", f"{title} beat two."],
        )
        for s, e in episodes
    ]
    arc = NarrativeArc(
        arc_id=arc_id,
        series=SERIES,
        title=title,
        description=f"{title} in detail.",
        arc_type=arc_type,
        main_characters=main,
        progressions=tuple(progressions),
    )
    stores.save_arc(arc)
    return arc


def all_arcs_valid(stores) -> bool:
    known = {c.character_id for c in stores.relational.list_characters(SERIES)}
    for arc_id in stores.relational.list_arc_ids(SERIES):
        if validate_arc(stores.relational.load_arc(arc_id), known_character_ids=known):
            return False
    return True


# -- timeline --------------------------------------------------------------------


def test_timeline_rows_columns_and_filters(client, stores):
    seed_character(stores, "Lena Vasquez")
    seed_character(stores, "Theo Marsh")
    seed_arc(stores, "Soap thread", ArcType.SOAP, episodes=((1, 1), (1, 2)))
    seed_arc(stores, "Case of the week", ArcType.ANTHOLOGY, episodes=((1, 2),), main_names=("Theo Marsh",))

    payload = client.get(f"/api/series/{SERIES}/seasons/1/arcs").json()
    assert payload["episodes"] == ["S01E01", "S01E02"]
    assert len(payload["arcs"]) == 2

    filtered = client.get(f"/api/series/{SERIES}/seasons/1/arcs", params={"type": "anthology"}).json()
    assert [a["title"] for a in filtered["arcs"]] == ["Case of the week"]

    theo = stores.relational.find_character_by_appellation(SERIES, "Theo Marsh").character_id
    by_character = client.get(f"/api/series/{SERIES}/seasons/1/arcs", params={"character": theo}).json()
    assert [a["title"] for a in by_character["arcs"]] == ["Case of the week"]


# -- CRUD ------------------------------------------------------------------------------


def test_arc_crud_round_trip(client, stores):
    lena = seed_character(stores, "Lena Vasquez")
    body = {
        "series": SERIES.name,
        "title": "Created via API",
        "description": "A storyline created through the endpoint.",
        "arc_type": "soap",
        "main_characters": [lena.character_id],
        "progressions": [
            {"episode": {"season": 1, "episode": 1}, "content": ["First beat."], "interfering_characters": []}
        ],
    }
    created = client.post("/api/arcs", json=body)
    assert created.status_code == 201
    arc_id = created.json()["arc_id"]

    fetched = client.get(f"/api/arcs/{arc_id}").json()
    assert fetched["title"] == "Created via API"
    assert fetched["progressions"][0]["content"] == ["First beat."]

    patched = client.patch(f"/api/arcs/{arc_id}", json={"description": "Amended."})
    assert patched.status_code == 200
    assert patched.json()["description"] == "Amended."

    deleted = client.delete(f"/api/arcs/{arc_id}")
    assert deleted.status_code == 204
    assert client.get(f"/api/arcs/{arc_id}").status_code == 404
    assert all_arcs_valid(stores)


def test_patch_empty_title_rejected_with_code(client, stores):
    seed_character(stores, "Lena Vasquez")
    arc = seed_arc(stores, "Valid title")
    response = client.patch(f"/api/arcs/{arc.arc_id}", json={"title": "  "})
    assert response.status_code == 400
    codes = [v["code"] for v in response.json()["detail"]["violations"]]
    assert "EMPTY_TITLE" in codes
    # Mutation did not land.
    assert stores.relational.load_arc(arc.arc_id).title == "Valid title"


def test_create_arc_with_unknown_character_rejected(client, stores):
    body = {
        "series": SERIES.name,
        "title": "Ghost cast",
        "description": "d",
        "arc_type": "soap",
        "main_characters": ["character-ghost"],
    }
    response = client.post("/api/arcs", json=body)
    assert response.status_code == 400
    codes = [v["code"] for v in response.json()["detail"]["violations"]]
    assert "UNKNOWN_CHARACTER" in codes


def test_arc_merge_concatenates_and_absorbed_404s(client, stores):
    seed_character(stores, "Lena Vasquez")
    keep = seed_arc(stores, "Keep me", episodes=((1, 1),))
    absorb = seed_arc(stores, "Absorb me", episodes=((1, 1), (1, 2)))
    response = client.post("/api/arcs/merge", json={"keep_id": keep.arc_id, "absorb_id": absorb.arc_id})
    assert response.status_code == 200
    merged = response.json()
    first = merged["progressions"][0]
    assert first["content"] == [
        "Keep me beat one.",
        "Keep me beat two.",
        "Absorb me beat one.",
        "Absorb me beat two.",
    ]
    assert client.get(f"/api/arcs/{absorb.arc_id}").status_code == 404
    # Absorbed embeddings are gone too.
    assert all(r.arc_id != absorb.arc_id for r in stores.vectors.records())
    assert all_arcs_valid(stores)


def test_arc_merge_conflict_is_409(client, stores):
    seed_character(stores, "Lena Vasquez")
    keep = seed_arc(stores, "Single-episode case", ArcType.ANTHOLOGY, episodes=((1, 1),))
    absorb = seed_arc(stores, "Other episode", episodes=((1, 2),))
    response = client.post("/api/arcs/merge", json={"keep_id": keep.arc_id, "absorb_id": absorb.arc_id})
    assert response.status_code == 409
    codes = [v["code"] for v in response.json()["violations"]]
    assert "ANTHOLOGY_MULTI_EPISODE" in codes


# -- progressions -------------------------------------------------------------------------


def test_progression_add_patch_delete(client, stores):
    seed_character(stores, "Lena Vasquez")
    arc = seed_arc(stores, "Progressive", episodes=((1, 1),))
    added = client.post(
        f"/api/arcs/{arc.arc_id}/progressions",
        json={"episode": {"season": 1, "episode": 2}, "content": ["New beat."]},
    )
    assert added.status_code == 201
    pid = added.json()["progressions"][1]["progression_id"]

    patched = client.patch(
        f"/api/arcs/{arc.arc_id}/progressions/{pid}", json={"content": ["Rewritten beat."]}
    )
    assert patched.json()["progressions"][1]["content"] == ["Rewritten beat."]

    removed = client.delete(f"/api/arcs/{arc.arc_id}/progressions/{pid}")
    assert len(removed.json()["progressions"]) == 1
    assert all_arcs_valid(stores)


def test_duplicate_episode_progression_rejected(client, stores):
    seed_character(stores, "Lena Vasquez")
    arc = seed_arc(stores, "One per episode", episodes=((1, 1),))
    response = client.post(
        f"/api/arcs/{arc.arc_id}/progressions",
        json={"episode": {"season": 1, "episode": 1}, "content": ["Also episode one."]},
    )
    assert response.status_code == 400
    codes = [v["code"] for v in response.json()["detail"]["violations"]]
    assert "DUPLICATE_EPISODE_PROGRESSION" in codes


def test_generate_progression_uses_gateway(tmp_path, stores):
    seed_character(stores, "Lena Vasquez")
    arc = seed_arc(stores, "Draft me")
    config = AppConfig(workspace=tmp_path / "ws")
    handlers = {
        "generate_progression": lambda v: {
            "utterances": [f"{v['title']} drafted development."],
            "interfering_characters": [],
        }
    }
    gateway = LlmGateway(tmp_path / "fx", provider=HandlerProvider(handlers), mode="live")
    app = create_app(config, stores=stores, gateway=gateway)
    client = TestClient(app)

    from arcmem.preprocess import save_document

    save_document(config.episodes_dir, normalized_doc(EpisodeKey(1, 2), ["Lena acts decisively."]))
    response = client.post(
        f"/api/arcs/{arc.arc_id}/progressions/generate", json={"episode": {"season": 1, "episode": 2}}
    )
    assert response.status_code == 200
    assert response.json()["content"] == ["Draft me drafted development."]
    # Nothing was saved: still one progression.
    assert len(stores.relational.load_arc(arc.arc_id).progressions) == 1


def test_generate_progression_without_document_400(client, stores):
    seed_character(stores, "Lena Vasquez")
    arc = seed_arc(stores, "No document")
    response = client.post(
        f"/api/arcs/{arc.arc_id}/progressions/generate", json={"episode": {"season": 1, "episode": 9}}
    )
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "NO_DOCUMENT"


# -- analytics endpoints ----------------------------------------------------------------------


def test_pca_single_arc_at_origin(client, stores):
    seed_character(stores, "Lena Vasquez")
    seed_arc(stores, "Only arc")
    payload = client.get(f"/api/series/{SERIES}/pca").json()
    [point] = payload["points"]
    assert (point["x"], point["y"], point["z"]) == (0.0, 0.0, 0.0)


def test_clusters_endpoint_with_threshold(client, stores):
    seed_character(stores, "Lena Vasquez")
    seed_arc(stores, "Storm readiness drills")
    seed_arc(stores, "Storm readiness drills again")
    seed_arc(stores, "Entirely different topic")
    tight = client.get(f"/api/series/{SERIES}/clusters", params={"threshold": 0.45}).json()
    sizes = sorted(len(c["member_ids"]) for c in tight["clusters"])
    assert sizes == [1, 2]
    singletons = client.get(f"/api/series/{SERIES}/clusters", params={"threshold": 0.01}).json()
    assert all(len(c["member_ids"]) == 1 for c in singletons["clusters"])


# -- characters ---------------------------------------------------------------------------------


def test_character_patch_and_merge_flow(client, stores):
    frost = seed_character(stores, "Frost")
    jerry = seed_character(stores, "Jerry Frost")
    seed_arc(stores, "Harbor politics", main_names=("Frost",))

    duplicates = client.get(f"/api/series/{SERIES}/characters/duplicates").json()
    assert len(duplicates["pairs"]) == 1
    assert duplicates["pairs"][0]["score"] == 0.5

    merged = client.post(
        "/api/characters/merge", json={"keep_id": jerry.character_id, "drop_id": frost.character_id}
    )
    assert merged.status_code == 200
    assert "Frost" in merged.json()["appellations"]

    arcs = client.get(f"/api/series/{SERIES}/seasons/1/arcs").json()["arcs"]
    assert arcs[0]["main_characters"] == [jerry.character_id]

    renamed = client.patch(
        f"/api/characters/{jerry.character_id}", json={"preferred_name": "Harbormaster Frost"}
    )
    assert renamed.status_code == 200
    assert "Harbormaster Frost" in renamed.json()["appellations"]

    after = client.get(f"/api/series/{SERIES}/characters/duplicates").json()
    assert after["pairs"] == []


def test_character_merge_unknown_is_404(client, stores):
    lena = seed_character(stores, "Lena Vasquez")
    response = client.post(
        "/api/characters/merge", json={"keep_id": lena.character_id, "drop_id": "character-ghost"}
    )
    assert response.status_code == 404


# -- pipeline runs ----------------------------------------------------------------------------------


def test_pipeline_run_with_missing_fixture_streams_replay_miss(tmp_path, stores):
    seed_character(stores, "Lena Vasquez")
    config = AppConfig(workspace=tmp_path / "ws", fixtures_dir=tmp_path / "fx")
    gateway = LlmGateway(tmp_path / "fx", provider=NoProvider(), mode="replay")
    app = create_app(config, stores=stores, gateway=gateway)
    client = TestClient(app)

    from arcmem.preprocess import save_document

    save_document(config.episodes_dir, normalized_doc(EpisodeKey(1, 1), ["Lena acts."]))

    started = client.post(
        "/api/pipeline/run", json={"series": SERIES.name, "season": 1, "mode": "replay"}
    )
    assert started.status_code == 202
    run_id = started.json()["run_id"]

    with client.stream("GET", f"/api/pipeline/runs/{run_id}/events") as response:
        events = [json.loads(line) for line in response.iter_lines() if line]
    kinds = [e["event"] for e in events]
    assert "run_failed" in kinds
    failure = next(e for e in events if e["event"] == "run_failed")
    assert failure["error"]["code"] == "REPLAY_MISS"


def test_second_concurrent_run_conflicts(tmp_path, stores):
    import threading

    seed_character(stores, "Lena Vasquez")
    config = AppConfig(workspace=tmp_path / "ws", fixtures_dir=tmp_path / "fx")

    release = threading.Event()

    class BlockingProvider:
        name = "blocking"

        def complete(self, request):
            release.wait(timeout=5)
            raise RuntimeError("stop the run")

    gateway = LlmGateway(tmp_path / "fx", provider=BlockingProvider(), mode="live")
    app = create_app(config, stores=stores, gateway=gateway)
    client = TestClient(app)

    from arcmem.preprocess import save_document

    save_document(config.episodes_dir, normalized_doc(EpisodeKey(1, 1), ["Lena acts."]))

    first = client.post("/api/pipeline/run", json={"series": SERIES.name, "season": 1, "mode": "live"})
    assert first.status_code == 202
    second = client.post("/api/pipeline/run", json={"series": SERIES.name, "season": 1, "mode": "live"})
    assert second.status_code == 409
    release.set()
    run_id = first.json()["run_id"]
    with client.stream("GET", f"/api/pipeline/runs/{run_id}/events") as response:
        for _ in response.iter_lines():
            pass
    third = client.post("/api/pipeline/run", json={"series": SERIES.name, "season": 1, "mode": "live"})
    assert third.status_code == 202
