"""Semantic-memory access: prompt catalog, structured completion, embeddings."""

from .embeddings import FALLBACK_DIMENSION, EmbeddingProvider, HashedNgramEmbedder, embed_texts
from .errors import (
    EmptyTextError,
    GatewayError,
    MissingVariableError,
    ProviderError,
    ProviderUnavailableError,
    ReplayMissError,
    SchemaViolationError,
    UnknownTemplateError,
    UnusedVariableError,
)
from .llm import (
    ChatProvider,
    LlmGateway,
    LlmRequest,
    LlmResponse,
    NoProvider,
    OpenAiCompatProvider,
    fingerprint,
    parse_json_response,
)
from .templates import PromptTemplate, TemplateCatalog, build_catalog

__all__ = [
    "FALLBACK_DIMENSION",
    "EmbeddingProvider",
    "HashedNgramEmbedder",
    "embed_texts",
    "EmptyTextError",
    "GatewayError",
    "MissingVariableError",
    "ProviderError",
    "ProviderUnavailableError",
    "ReplayMissError",
    "SchemaViolationError",
    "UnknownTemplateError",
    "UnusedVariableError",
    "ChatProvider",
    "LlmGateway",
    "LlmRequest",
    "LlmResponse",
    "NoProvider",
    "OpenAiCompatProvider",
    "fingerprint",
    "parse_json_response",
    "PromptTemplate",
    "TemplateCatalog",
    "build_catalog",
]
