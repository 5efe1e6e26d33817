"""Memory preparation: plot loading, simplification, pronoun resolution,
entity normalization."""

from .documents import (
    ABBREVIATIONS,
    EmptyPlotError,
    EpisodeDocument,
    KeyParseError,
    MentionCandidate,
    PreprocessError,
    StageOrderError,
    document_path,
    list_documents,
    load_document,
    load_episode,
    parse_episode_filename,
    save_document,
    segment_sentences,
)
from .entities import (
    CharacterConflictError,
    EntityExtraction,
    HeuristicMentionProvider,
    LlmMentionProvider,
    ProtoEntity,
    appellation_tokens,
    build_replacements,
    extract_entities,
    normalize_characters,
    substitute_names,
    suggest_duplicate_characters,
    unsubstituted_surfaces,
)
from .stages import contains_third_person_pronoun, resolve_pronouns, simplify_plot

__all__ = [
    "ABBREVIATIONS",
    "EmptyPlotError",
    "EpisodeDocument",
    "KeyParseError",
    "MentionCandidate",
    "PreprocessError",
    "StageOrderError",
    "document_path",
    "list_documents",
    "load_document",
    "load_episode",
    "parse_episode_filename",
    "save_document",
    "segment_sentences",
    "CharacterConflictError",
    "EntityExtraction",
    "HeuristicMentionProvider",
    "LlmMentionProvider",
    "ProtoEntity",
    "appellation_tokens",
    "build_replacements",
    "extract_entities",
    "normalize_characters",
    "substitute_names",
    "suggest_duplicate_characters",
    "unsubstituted_surfaces",
    "contains_third_person_pronoun",
    "resolve_pronouns",
    "simplify_plot",
]
