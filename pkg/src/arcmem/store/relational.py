"""Relational long-term memory: SQLite persistence for arcs, progressions,
and characters, with cascade deletes and character merging."""

from __future__ import annotations

import json
import sqlite3
import threading
from pathlib import Path

from ..model import (
    ArcType,
    Character,
    EpisodeKey,
    NarrativeArc,
    Progression,
    SeriesId,
    normalize_appellation,
)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS characters (
    character_id TEXT PRIMARY KEY,
    series TEXT NOT NULL,
    preferred_name TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS appellations (
    character_id TEXT NOT NULL REFERENCES characters(character_id) ON DELETE CASCADE,
    series TEXT NOT NULL,
    surface TEXT NOT NULL,
    norm TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_appellations_norm ON appellations (series, norm);
CREATE TABLE IF NOT EXISTS arcs (
    arc_id TEXT PRIMARY KEY,
    series TEXT NOT NULL,
    title TEXT NOT NULL,
    description TEXT NOT NULL,
    arc_type TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS arc_main_characters (
    arc_id TEXT NOT NULL REFERENCES arcs(arc_id) ON DELETE CASCADE,
    position INTEGER NOT NULL,
    character_id TEXT NOT NULL,
    PRIMARY KEY (arc_id, position)
);
CREATE TABLE IF NOT EXISTS progressions (
    progression_id TEXT PRIMARY KEY,
    arc_id TEXT NOT NULL REFERENCES arcs(arc_id) ON DELETE CASCADE,
    series TEXT NOT NULL,
    season INTEGER NOT NULL,
    episode INTEGER NOT NULL,
    UNIQUE (arc_id, season, episode)
);
CREATE TABLE IF NOT EXISTS progression_utterances (
    progression_id TEXT NOT NULL REFERENCES progressions(progression_id) ON DELETE CASCADE,
    ordinal INTEGER NOT NULL,
    text TEXT NOT NULL,
    PRIMARY KEY (progression_id, ordinal)
);
CREATE TABLE IF NOT EXISTS progression_interfering (
    progression_id TEXT NOT NULL REFERENCES progressions(progression_id) ON DELETE CASCADE,
    position INTEGER NOT NULL,
    character_id TEXT NOT NULL,
    PRIMARY KEY (progression_id, position)
);
CREATE TABLE IF NOT EXISTS processed_episodes (
    series TEXT NOT NULL,
    season INTEGER NOT NULL,
    episode INTEGER NOT NULL,
    result TEXT NOT NULL,
    PRIMARY KEY (series, season, episode)
);
"""


class StoreError(Exception):
    code = "STORE_ERROR"


class UnknownIdError(StoreError):
    code = "UNKNOWN_ID"


class ReferentialIntegrityError(StoreError):
    code = "UNKNOWN_CHARACTER"


class AppellationCollisionError(StoreError):
    code = "APPELLATION_COLLISION"


class RelationalStore:
    """Single-file embedded store. Writes are serialized by a process-wide
    lock (single-writer contract); reads may come from any thread."""

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        if self.path != ":memory:":
            Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.execute("PRAGMA foreign_keys = ON")
        self._lock = threading.RLock()
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    # -- characters ---------------------------------------------------------

    def save_character(self, character: Character) -> None:
        with self._lock:
            for surface in character.appellations:
                norm = normalize_appellation(surface)
                row = self._conn.execute(
                    "SELECT character_id FROM appellations WHERE series = ? AND norm = ?",
                    (character.series.name, norm),
                ).fetchone()
                if row and row[0] != character.character_id:
                    raise AppellationCollisionError(
                        f"appellation {surface!r} already belongs to character {row[0]}"
                    )
            self._conn.execute(
                "INSERT INTO characters (character_id, series, preferred_name) VALUES (?, ?, ?) "
                "ON CONFLICT(character_id) DO UPDATE SET preferred_name = excluded.preferred_name",
                (character.character_id, character.series.name, character.preferred_name),
            )
            self._conn.execute("DELETE FROM appellations WHERE character_id = ?", (character.character_id,))
            self._conn.executemany(
                "INSERT INTO appellations (character_id, series, surface, norm) VALUES (?, ?, ?, ?)",
                [
                    (character.character_id, character.series.name, s, normalize_appellation(s))
                    for s in sorted(character.appellations)
                ],
            )
            self._conn.commit()

    def get_character(self, character_id: str) -> Character:
        row = self._conn.execute(
            "SELECT character_id, series, preferred_name FROM characters WHERE character_id = ?",
            (character_id,),
        ).fetchone()
        if row is None:
            raise UnknownIdError(f"unknown character id: {character_id}")
        surfaces = [
            r[0]
            for r in self._conn.execute(
                "SELECT surface FROM appellations WHERE character_id = ? ORDER BY surface", (character_id,)
            )
        ]
        return Character(
            character_id=row[0],
            series=SeriesId(row[1]),
            preferred_name=row[2],
            appellations=frozenset(surfaces),
        )

    def list_characters(self, series: SeriesId) -> list[Character]:
        ids = [
            r[0]
            for r in self._conn.execute(
                "SELECT character_id FROM characters WHERE series = ? ORDER BY preferred_name, character_id",
                (series.name,),
            )
        ]
        return [self.get_character(cid) for cid in ids]

    def find_character_by_appellation(self, series: SeriesId, surface: str) -> Character | None:
        row = self._conn.execute(
            "SELECT character_id FROM appellations WHERE series = ? AND norm = ?",
            (series.name, normalize_appellation(surface)),
        ).fetchone()
        return self.get_character(row[0]) if row else None

    def delete_character(self, character_id: str) -> None:
        with self._lock:
            referenced = self._conn.execute(
                "SELECT COUNT(*) FROM arc_main_characters WHERE character_id = ?", (character_id,)
            ).fetchone()[0]
            referenced += self._conn.execute(
                "SELECT COUNT(*) FROM progression_interfering WHERE character_id = ?", (character_id,)
            ).fetchone()[0]
            if referenced:
                raise ReferentialIntegrityError(f"character {character_id} is referenced by arcs")
            cur = self._conn.execute("DELETE FROM characters WHERE character_id = ?", (character_id,))
            if cur.rowcount == 0:
                raise UnknownIdError(f"unknown character id: {character_id}")
            self._conn.commit()

    def merge_characters(self, keep_id: str, drop_id: str) -> Character:
        """Union appellations into keep, rewrite all references, drop the
        other character. Collisions with a third character are an error."""
        if keep_id == drop_id:
            raise StoreError("cannot merge a character into itself")
        keep = self.get_character(keep_id)
        drop = self.get_character(drop_id)
        with self._lock:
            for surface in drop.appellations:
                norm = normalize_appellation(surface)
                row = self._conn.execute(
                    "SELECT character_id FROM appellations WHERE series = ? AND norm = ?",
                    (keep.series.name, norm),
                ).fetchone()
                if row and row[0] not in (keep_id, drop_id):
                    raise AppellationCollisionError(
                        f"appellation {surface!r} already belongs to character {row[0]}"
                    )
            merged_surfaces = dict()
            for surface in sorted(keep.appellations | drop.appellations):
                merged_surfaces.setdefault(normalize_appellation(surface), surface)
            self._conn.execute("DELETE FROM appellations WHERE character_id IN (?, ?)", (keep_id, drop_id))
            self._conn.executemany(
                "INSERT INTO appellations (character_id, series, surface, norm) VALUES (?, ?, ?, ?)",
                [(keep_id, keep.series.name, s, n) for n, s in sorted(merged_surfaces.items())],
            )
            # Rewrite references, collapsing rows where both ids were present.
            for table, id_col in (
                ("arc_main_characters", "arc_id"),
                ("progression_interfering", "progression_id"),
            ):
                owners = [
                    r[0]
                    for r in self._conn.execute(
                        f"SELECT DISTINCT {id_col} FROM {table} WHERE character_id = ?", (drop_id,)
                    )
                ]
                for owner in owners:
                    original = [
                        r[0]
                        for r in self._conn.execute(
                            f"SELECT character_id FROM {table} WHERE {id_col} = ? ORDER BY position", (owner,)
                        )
                    ]
                    rewritten = list(dict.fromkeys(keep_id if cid == drop_id else cid for cid in original))
                    self._conn.execute(f"DELETE FROM {table} WHERE {id_col} = ?", (owner,))
                    self._conn.executemany(
                        f"INSERT INTO {table} ({id_col}, position, character_id) VALUES (?, ?, ?)",
                        [(owner, i, cid) for i, cid in enumerate(rewritten)],
                    )
            self._conn.execute("DELETE FROM characters WHERE character_id = ?", (drop_id,))
            self._conn.commit()
        return self.get_character(keep_id)

    # -- arcs ----------------------------------------------------------------

    def save_arc(self, arc: NarrativeArc) -> None:
        """Upsert the whole aggregate; character references must exist."""
        known = {
            r[0]
            for r in self._conn.execute(
                "SELECT character_id FROM characters WHERE series = ?", (arc.series.name,)
            )
        }
        referenced = set(arc.main_characters)
        for p in arc.progressions:
            referenced.update(p.interfering_characters)
        unknown = sorted(referenced - known)
        if unknown:
            raise ReferentialIntegrityError(f"unknown character ids: {', '.join(unknown)}")
        with self._lock:
            try:
                self._conn.execute("DELETE FROM arcs WHERE arc_id = ?", (arc.arc_id,))
                self._conn.execute(
                    "INSERT INTO arcs (arc_id, series, title, description, arc_type) VALUES (?, ?, ?, ?, ?)",
                    (arc.arc_id, arc.series.name, arc.title, arc.description, arc.arc_type.value),
                )
                self._conn.executemany(
                    "INSERT INTO arc_main_characters (arc_id, position, character_id) VALUES (?, ?, ?)",
                    [(arc.arc_id, i, cid) for i, cid in enumerate(arc.main_characters)],
                )
                for p in arc.progressions:
                    self._conn.execute(
                        "INSERT INTO progressions (progression_id, arc_id, series, season, episode) VALUES (?, ?, ?, ?, ?)",
                        (p.progression_id, p.arc_id, p.series.name, p.episode.season, p.episode.episode),
                    )
                    self._conn.executemany(
                        "INSERT INTO progression_utterances (progression_id, ordinal, text) VALUES (?, ?, ?)",
                        [(p.progression_id, u.ordinal, u.text) for u in p.content],
                    )
                    self._conn.executemany(
                        "INSERT INTO progression_interfering (progression_id, position, character_id) VALUES (?, ?, ?)",
                        [(p.progression_id, i, cid) for i, cid in enumerate(p.interfering_characters)],
                    )
                self._conn.commit()
            except Exception:
                self._conn.rollback()
                raise

    def load_arc(self, arc_id: str) -> NarrativeArc:
        row = self._conn.execute(
            "SELECT arc_id, series, title, description, arc_type FROM arcs WHERE arc_id = ?",
            (arc_id,),
        ).fetchone()
        if row is None:
            raise UnknownIdError(f"unknown arc id: {arc_id}")
        series = SeriesId(row[1])
        main = [
            r[0]
            for r in self._conn.execute(
                "SELECT character_id FROM arc_main_characters WHERE arc_id = ? ORDER BY position", (arc_id,)
            )
        ]
        progressions = []
        for pid, season, episode in self._conn.execute(
            "SELECT progression_id, season, episode FROM progressions WHERE arc_id = ? ORDER BY season, episode",
            (arc_id,),
        ).fetchall():
            utterances = [
                r[0]
                for r in self._conn.execute(
                    "SELECT text FROM progression_utterances WHERE progression_id = ? ORDER BY ordinal", (pid,)
                )
            ]
            interfering = [
                r[0]
                for r in self._conn.execute(
                    "SELECT character_id FROM progression_interfering WHERE progression_id = ? ORDER BY position",
                    (pid,),
                )
            ]
            progressions.append(
                Progression.build(
                    progression_id=pid,
                    arc_id=arc_id,
                    series=series,
                    episode=EpisodeKey(season=season, episode=episode),
                    utterances=utterances,
                    interfering_characters=interfering,
                )
            )
        return NarrativeArc(
            arc_id=row[0],
            series=series,
            title=row[2],
            description=row[3],
            arc_type=ArcType.parse(row[4]),
            main_characters=tuple(main),
            progressions=tuple(progressions),
        )

    def list_arc_ids(self, series: SeriesId | None = None) -> list[str]:
        if series is None:
            rows = self._conn.execute("SELECT arc_id FROM arcs ORDER BY series, title, arc_id")
        else:
            rows = self._conn.execute(
                "SELECT arc_id FROM arcs WHERE series = ? ORDER BY title, arc_id", (series.name,)
            )
        return [r[0] for r in rows]

    def list_arcs(
        self,
        series: SeriesId,
        arc_type: ArcType | None = None,
        character: str | None = None,
    ) -> list[NarrativeArc]:
        """Arcs of one series, optionally restricted by type and by an
        associated character (main or interfering)."""
        arcs = [self.load_arc(aid) for aid in self.list_arc_ids(series)]
        if arc_type is not None:
            arcs = [a for a in arcs if a.arc_type is arc_type]
        if character is not None:
            arcs = [
                a
                for a in arcs
                if character in a.main_characters
                or any(character in p.interfering_characters for p in a.progressions)
            ]
        return arcs

    def delete_arc(self, arc_id: str) -> None:
        with self._lock:
            cur = self._conn.execute("DELETE FROM arcs WHERE arc_id = ?", (arc_id,))
            if cur.rowcount == 0:
                raise UnknownIdError(f"unknown arc id: {arc_id}")
            self._conn.commit()

    def orphan_counts(self) -> dict[str, int]:
        """Diagnostics: rows whose parents are gone (should always be 0)."""
        progressions = self._conn.execute(
            "SELECT COUNT(*) FROM progressions p LEFT JOIN arcs a ON p.arc_id = a.arc_id WHERE a.arc_id IS NULL"
        ).fetchone()[0]
        utterances = self._conn.execute(
            "SELECT COUNT(*) FROM progression_utterances u LEFT JOIN progressions p "
            "ON u.progression_id = p.progression_id WHERE p.progression_id IS NULL"
        ).fetchone()[0]
        return {"progressions": progressions, "utterances": utterances}

    def dangling_character_references(self) -> list[str]:
        rows = self._conn.execute(
            "SELECT DISTINCT character_id FROM arc_main_characters "
            "WHERE character_id NOT IN (SELECT character_id FROM characters) "
            "UNION SELECT DISTINCT character_id FROM progression_interfering "
            "WHERE character_id NOT IN (SELECT character_id FROM characters)"
        ).fetchall()
        return sorted(r[0] for r in rows)

    # -- episode processing registry -----------------------------------------

    def mark_processed(self, series: SeriesId, episode: EpisodeKey, result: dict) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO processed_episodes (series, season, episode, result) VALUES (?, ?, ?, ?)",
                (series.name, episode.season, episode.episode, json.dumps(result, sort_keys=True)),
            )
            self._conn.commit()

    def processed_result(self, series: SeriesId, episode: EpisodeKey) -> dict | None:
        row = self._conn.execute(
            "SELECT result FROM processed_episodes WHERE series = ? AND season = ? AND episode = ?",
            (series.name, episode.season, episode.episode),
        ).fetchone()
        return json.loads(row[0]) if row else None

    def processed_episodes(self, series: SeriesId, season: int | None = None) -> list[EpisodeKey]:
        if season is None:
            rows = self._conn.execute(
                "SELECT season, episode FROM processed_episodes WHERE series = ? ORDER BY season, episode",
                (series.name,),
            )
        else:
            rows = self._conn.execute(
                "SELECT season, episode FROM processed_episodes WHERE series = ? AND season = ? ORDER BY season, episode",
                (series.name, season),
            )
        return [EpisodeKey(season=r[0], episode=r[1]) for r in rows]

    def clear_processed(self, series: SeriesId, episode: EpisodeKey) -> None:
        with self._lock:
            self._conn.execute(
                "DELETE FROM processed_episodes WHERE series = ? AND season = ? AND episode = ?",
                (series.name, episode.season, episode.episode),
            )
            self._conn.commit()
