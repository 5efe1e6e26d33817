from __future__ import annotations

import json

import pytest


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        if name.startswith("test_"):
            name = name[len("test_"):]
        print(f"\nACCEPTANCE {name}: {'PASS' if report.passed else 'FAIL'}")

from arcmem.config import AppConfig
from arcmem.gateway import HashedNgramEmbedder, LlmGateway
from arcmem.model import Character, EpisodeKey, SeriesId, derive_id
from arcmem.pipeline import PipelineContext
from arcmem.preprocess import EpisodeDocument
from arcmem.store import MemoryStores, RelationalStore, VectorStore

SERIES = SeriesId("saltmarsh")


class HandlerProvider:
    """Fake chat provider: one handler per template id, fed the variables."""

    name = "handler"

    def __init__(self, handlers: dict):
        self.handlers = dict(handlers)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        if request.template_id not in self.handlers:
            raise AssertionError(f"no handler for template {request.template_id!r}")
        return json.dumps(self.handlers[request.template_id](dict(request.variables)))


@pytest.fixture
def memory_stores(tmp_path):
    embedder = HashedNgramEmbedder(dimension=128)
    stores = MemoryStores(
        RelationalStore(tmp_path / "memory.db"),
        VectorStore(dimension=128, embedder=embedder),
    )
    yield stores
    stores.relational.close()


def seed_character(stores: MemoryStores, name: str, *extra: str) -> Character:
    character = Character(
        character_id=derive_id("character", SERIES, name.casefold()),
        series=SERIES,
        preferred_name=name,
        appellations=frozenset({name, *extra}),
    )
    stores.relational.save_character(character)
    return character


def normalized_doc(episode: EpisodeKey, sentences: list[str]) -> EpisodeDocument:
    return EpisodeDocument(
        series=SERIES,
        episode=episode,
        raw_text=" ".join(sentences),
        sentences=tuple(sentences),
        simplified=tuple(sentences),
        resolved=tuple(sentences),
        normalized=tuple(sentences),
        status="normalized",
    )


def make_context(
    tmp_path,
    stores: MemoryStores,
    handlers: dict,
    episode: EpisodeKey = EpisodeKey(1, 1),
    sentences: list[str] | None = None,
    config: AppConfig | None = None,
) -> PipelineContext:
    provider = HandlerProvider(handlers)
    gateway = LlmGateway(tmp_path / "fx", provider=provider, mode="live")
    ctx = PipelineContext(
        series=SERIES,
        episode=episode,
        doc=normalized_doc(episode, sentences or ["Lena briefs Theo Marsh.", "Frost watches the tide."]),
        stores=stores,
        gateway=gateway,
        config=config or AppConfig(workspace=tmp_path / "ws"),
        mode="live",
    )
    ctx.provider = provider  # handy for assertions
    return ctx
