"""Episode documents: loading plot files, sentence segmentation, staging.

A document moves through four stages (loaded, simplified, resolved,
normalized); each stage writes its own field and never mutates the output
of an earlier one.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path

from ..model import EpisodeKey, SeriesId

STATUSES = ("loaded", "simplified", "resolved", "normalized")

# Honorifics and similar tokens that end with a period mid-sentence.
ABBREVIATIONS = {
    "dr", "mr", "mrs", "ms", "st", "jr", "sr", "prof", "capt", "lt", "sgt",
    "vs", "etc", "no", "approx",
}

_TERMINAL_RE = re.compile(r'([.?!]+["\')\]]?)(\s+)')


class PreprocessError(Exception):
    code = "PREPROCESS_ERROR"


class KeyParseError(PreprocessError):
    code = "KEY_PARSE"


class EmptyPlotError(PreprocessError):
    code = "EMPTY_PLOT"


class StageOrderError(PreprocessError):
    code = "STAGE_ORDER"


@dataclass(frozen=True)
class MentionCandidate:
    surface: str
    sentence_index: int
    source: str  # "ner" | "llm_refinement"


@dataclass(frozen=True)
class EpisodeDocument:
    series: SeriesId
    episode: EpisodeKey
    raw_text: str
    sentences: tuple[str, ...] = ()
    simplified: tuple[str, ...] = ()
    resolved: tuple[str, ...] = ()
    normalized: tuple[str, ...] = ()
    status: str = "loaded"

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise PreprocessError(f"unknown document status: {self.status!r}")

    def stage_index(self) -> int:
        return STATUSES.index(self.status)

    def require_status(self, minimum: str) -> None:
        if self.stage_index() < STATUSES.index(minimum):
            raise StageOrderError(
                f"document {self.series}/{self.episode} is {self.status}, needs at least {minimum}"
            )

    def advance(self, status: str, **fields) -> "EpisodeDocument":
        """Record a stage's output. Status never moves backward, so re-running
        a completed stage (idempotently) keeps the later status."""
        keep = max(status, self.status, key=STATUSES.index)
        return replace(self, status=keep, **fields)

    def to_json(self) -> dict:
        return {
            "series": self.series.name,
            "episode": self.episode.to_json(),
            "raw_text": self.raw_text,
            "sentences": list(self.sentences),
            "simplified": list(self.simplified),
            "resolved": list(self.resolved),
            "normalized": list(self.normalized),
            "status": self.status,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EpisodeDocument":
        return cls(
            series=SeriesId(data["series"]),
            episode=EpisodeKey.from_json(data["episode"]),
            raw_text=data["raw_text"],
            sentences=tuple(data["sentences"]),
            simplified=tuple(data["simplified"]),
            resolved=tuple(data["resolved"]),
            normalized=tuple(data["normalized"]),
            status=data["status"],
        )


def parse_episode_filename(name: str) -> EpisodeKey:
    m = re.match(r"[Ss](\d+)[Ee](\d+)", name)
    if not m:
        raise KeyParseError(f"filename {name!r} does not start with an episode key like S01E03")
    return EpisodeKey(season=int(m.group(1)), episode=int(m.group(2)))


def load_episode(path: str | Path, series: SeriesId) -> EpisodeDocument:
    """Read one UTF-8 plot file named ``S{ss}E{ee}*.txt``; sentences are
    segmented immediately since segmentation is deterministic."""
    path = Path(path)
    episode = parse_episode_filename(path.name)
    try:
        raw_text = path.read_text("utf-8")
    except OSError as exc:
        raise PreprocessError(f"cannot read {path}: {exc}") from exc
    if not raw_text.strip():
        raise EmptyPlotError(f"plot file {path} is empty")
    return EpisodeDocument(
        series=series,
        episode=episode,
        raw_text=raw_text,
        sentences=tuple(segment_sentences(raw_text)),
        status="loaded",
    )


def segment_sentences(raw_text: str) -> list[str]:
    """Rule-based split on terminal punctuation with abbreviation guards.

    Joining the result (modulo whitespace) reproduces the input text.
    """
    if not raw_text.strip():
        raise PreprocessError("cannot segment empty text")
    text = raw_text.strip()
    sentences: list[str] = []
    start = 0
    for match in _TERMINAL_RE.finditer(text):
        end = match.end(1)
        candidate = text[start:end]
        token = _last_word(candidate)
        if candidate.rstrip().endswith(".") and token in ABBREVIATIONS:
            continue
        sentences.append(_collapse(candidate))
        start = match.end()
    tail = text[start:]
    if tail.strip():
        sentences.append(_collapse(tail))
    return sentences


def _last_word(chunk: str) -> str:
    word = re.findall(r"[A-Za-z]+(?=[.?!]+[\"')\]]?$)", chunk.rstrip())
    return word[-1].lower() if word else ""


def _collapse(chunk: str) -> str:
    return re.sub(r"\s+", " ", chunk.strip())


# -- staging ----------------------------------------------------------------------


def document_path(episodes_dir: str | Path, series: SeriesId, episode: EpisodeKey) -> Path:
    return Path(episodes_dir) / series.name / f"{episode}.json"


def save_document(episodes_dir: str | Path, doc: EpisodeDocument) -> Path:
    path = document_path(episodes_dir, doc.series, doc.episode)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc.to_json(), indent=2, ensure_ascii=False, sort_keys=True) + "\n", "utf-8")
    return path


def load_document(episodes_dir: str | Path, series: SeriesId, episode: EpisodeKey) -> EpisodeDocument:
    path = document_path(episodes_dir, series, episode)
    if not path.exists():
        raise PreprocessError(f"no staged document for {series}/{episode} under {episodes_dir}")
    return EpisodeDocument.from_json(json.loads(path.read_text("utf-8")))


def list_documents(episodes_dir: str | Path, series: SeriesId) -> list[EpisodeKey]:
    root = Path(episodes_dir) / series.name
    if not root.exists():
        return []
    keys = []
    for path in root.glob("S*.json"):
        try:
            keys.append(EpisodeKey.parse(path.stem))
        except Exception:
            continue
    return sorted(keys)
