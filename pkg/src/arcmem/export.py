"""Canonical JSON export of the arc store, stable for golden-file diffs."""

from __future__ import annotations

import json

from .model import SeriesId
from .store import MemoryStores


def export_arcs(stores: MemoryStores, series: SeriesId | None = None) -> dict:
    """All arcs (optionally one series), sorted by (series, title, arc_id)."""
    arc_ids = stores.relational.list_arc_ids(series)
    arcs = [stores.relational.load_arc(arc_id) for arc_id in arc_ids]
    arcs.sort(key=lambda a: (a.series.name, a.title, a.arc_id))
    return {"arcs": [a.to_json() for a in arcs]}


def render_export(payload: dict) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n"
