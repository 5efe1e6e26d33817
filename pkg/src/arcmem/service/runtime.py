"""Shared wiring: build stores and gateway from configuration."""

from __future__ import annotations

from ..config import AppConfig
from ..gateway import HashedNgramEmbedder, LlmGateway, NoProvider, OpenAiCompatProvider
from ..gateway.errors import ProviderUnavailableError
from ..store import MemoryStores


def build_stores(config: AppConfig) -> MemoryStores:
    config.ensure_workspace()
    embedder = HashedNgramEmbedder(dimension=config.embedding_dimension)
    return MemoryStores.open(
        db_path=config.relational_db_path,
        vectors_meta_path=config.vectors_meta_path,
        vectors_data_path=config.vectors_data_path,
        embedder=embedder,
        embed_utterances=config.embed_utterances,
    )


def build_gateway(config: AppConfig, mode: str | None = None) -> LlmGateway:
    mode = mode or config.mode
    if mode in ("live", "record"):
        try:
            provider = OpenAiCompatProvider()
        except ProviderUnavailableError:
            # Constructed lazily so replay-only setups need no credentials;
            # any live call will surface PROVIDER_UNAVAILABLE.
            provider = NoProvider()
    else:
        provider = NoProvider()
    return LlmGateway(
        fixtures_dir=config.fixtures_dir,
        provider=provider,
        mode=mode,
        retry_budget=config.retry_budget,
    )
