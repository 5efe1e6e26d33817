"""LLM-backed preprocessing: sentence simplification and pronoun resolution."""

from __future__ import annotations

import re

from ..gateway import LlmGateway
from .documents import EpisodeDocument, PreprocessError

SIMPLIFY_CHUNK_SIZE = 20
PRONOUN_WINDOW = 15

# Third-person pronouns that trigger resolution.
_PRONOUN_RE = re.compile(
    r"\b(he|him|his|she|her|hers|they|them|their|theirs|himself|herself|themselves)\b",
    re.IGNORECASE,
)


def contains_third_person_pronoun(sentence: str) -> bool:
    return bool(_PRONOUN_RE.search(sentence))


def simplify_plot(
    doc: EpisodeDocument,
    gateway: LlmGateway,
    chunk_size: int = SIMPLIFY_CHUNK_SIZE,
    mode: str | None = None,
) -> EpisodeDocument:
    """Rewrite the segmented sentences in simpler forms, one character or
    event per sentence, no quotations. Sentences go out in chunks to bound
    prompt size."""
    doc.require_status("loaded")
    if not doc.sentences:
        raise PreprocessError("document has no sentences to simplify")
    simplified: list[str] = []
    for start in range(0, len(doc.sentences), chunk_size):
        chunk = doc.sentences[start : start + chunk_size]
        parsed = gateway.complete_structured(
            "simplify_sentences",
            {"episode": str(doc.episode), "sentences": "\n".join(chunk)},
            mode=mode,
        )
        simplified.extend(parsed["sentences"])
    return doc.advance("simplified", simplified=tuple(simplified))


def resolve_pronouns(
    doc: EpisodeDocument,
    gateway: LlmGateway,
    window: int = PRONOUN_WINDOW,
    mode: str | None = None,
) -> EpisodeDocument:
    """Replace third-person pronouns with character names, sentence by
    sentence. Each call sees at most ``window`` sentences including the
    target: the preceding min(window - 1, available) plus the target.
    Sentences without a pronoun pass through with no gateway call."""
    doc.require_status("simplified")
    if window < 1:
        raise PreprocessError("window must be >= 1")
    resolved: list[str] = []
    for index, sentence in enumerate(doc.simplified):
        if not contains_third_person_pronoun(sentence):
            resolved.append(sentence)
            continue
        context_start = max(0, index - (window - 1))
        context = resolved[context_start:index]
        parsed = gateway.complete_structured(
            "resolve_pronouns",
            {"context": "\n".join(context) if context else "(none)", "sentence": sentence},
            mode=mode,
        )
        resolved.append(parsed["resolved"])
    return doc.advance("resolved", resolved=tuple(resolved))
