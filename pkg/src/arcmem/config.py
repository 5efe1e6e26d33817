"""Runtime configuration: paths, gateway mode, and tuning thresholds.

Values load from an optional JSON file, with ``ARCMEM_*`` environment
variables overriding individual fields.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

_ENV_PREFIX = "ARCMEM_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AppConfig:
    workspace: Path = Path("workspace")
    host: str = "127.0.0.1"
    port: int = 8765
    mode: str = "replay"  # live | replay | record
    fixtures_dir: Path = Path("fixtures/llm")
    embedding_dimension: int = 256
    embed_utterances: bool = False
    # Retrieval / consolidation thresholds (cosine unless noted).
    flag_threshold: float = 0.55
    dedup_threshold: float = 0.80
    match_threshold: float = 0.60
    jaccard_threshold: float = 0.50  # Jaccard index
    cluster_distance_threshold: float = 0.30  # cosine distance
    # Preprocessing knobs.
    pronoun_window: int = 15
    simplify_chunk_size: int = 20
    agent1_chunk_sentences: int = 6
    retry_budget: int = 2

    def __post_init__(self) -> None:
        if self.mode not in ("live", "replay", "record"):
            raise ConfigError(f"mode must be live, replay or record, got {self.mode!r}")
        for name, low, high in (
            ("flag_threshold", -1.0, 1.0),
            ("dedup_threshold", -1.0, 1.0),
            ("match_threshold", -1.0, 1.0),
            ("jaccard_threshold", 0.0, 1.0),
        ):
            value = getattr(self, name)
            if not (low <= value <= high):
                raise ConfigError(f"{name} must be within [{low}, {high}], got {value}")
        if not (0.0 < self.cluster_distance_threshold < 2.0):
            raise ConfigError("cluster_distance_threshold must be in (0, 2)")
        if self.pronoun_window < 1:
            raise ConfigError("pronoun_window must be >= 1")
        if self.simplify_chunk_size < 1 or self.agent1_chunk_sentences < 1:
            raise ConfigError("chunk sizes must be >= 1")

    # -- derived paths ---------------------------------------------------------

    @property
    def relational_db_path(self) -> Path:
        return self.workspace / "stores" / "memory.db"

    @property
    def vectors_meta_path(self) -> Path:
        return self.workspace / "stores" / "vectors.jsonl"

    @property
    def vectors_data_path(self) -> Path:
        return self.workspace / "stores" / "vectors.f32"

    @property
    def episodes_dir(self) -> Path:
        return self.workspace / "episodes"

    @property
    def runs_dir(self) -> Path:
        return self.workspace / "runs"

    def ensure_workspace(self) -> None:
        for path in (self.workspace, self.episodes_dir, self.runs_dir, self.relational_db_path.parent):
            path.mkdir(parents=True, exist_ok=True)


_PATH_FIELDS = {"workspace", "fixtures_dir"}
_BOOL_FIELDS = {"embed_utterances"}


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> AppConfig:
    """File values, then environment, then explicit overrides."""
    values: dict = {}
    if path is not None:
        data = json.loads(Path(path).read_text("utf-8"))
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        values.update(data)

    valid = {f.name: f.type for f in fields(AppConfig)}
    for key in list(values):
        if key not in valid:
            raise ConfigError(f"unknown config key: {key!r}")

    for f in fields(AppConfig):
        env_name = _ENV_PREFIX + f.name.upper()
        if env_name in os.environ:
            values[f.name] = os.environ[env_name]

    if overrides:
        for key, value in overrides.items():
            if value is not None:
                values[key] = value

    coerced: dict = {}
    defaults = AppConfig()
    for f in fields(AppConfig):
        if f.name not in values:
            continue
        raw = values[f.name]
        if f.name in _PATH_FIELDS:
            coerced[f.name] = Path(raw)
        elif f.name in _BOOL_FIELDS:
            coerced[f.name] = raw if isinstance(raw, bool) else str(raw).lower() in ("1", "true", "yes", "on")
        elif isinstance(getattr(defaults, f.name), int) and not isinstance(getattr(defaults, f.name), bool):
            coerced[f.name] = int(raw)
        elif isinstance(getattr(defaults, f.name), float):
            coerced[f.name] = float(raw)
        else:
            coerced[f.name] = raw
    return AppConfig(**coerced)
