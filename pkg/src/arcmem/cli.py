"""Command line interface: ingest, preprocess, extract, evaluate, export, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import AppConfig, load_config
from .evaluation import GoldStandard, compute_report, match_arcs
from .export import export_arcs, render_export
from .model import SeriesId
from .pipeline import run_season
from .preprocess import (
    build_replacements,
    extract_entities,
    list_documents,
    load_document,
    load_episode,
    normalize_characters,
    resolve_pronouns,
    save_document,
    simplify_plot,
    substitute_names,
)
from .service.runtime import build_gateway, build_stores


def _fail(code: str, message: str) -> None:
    click.echo(json.dumps({"error": code, "message": message}), err=True)
    sys.exit(1)


def _config(ctx: click.Context) -> AppConfig:
    return ctx.obj["config"]


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--workspace", type=click.Path(file_okay=False), default=None)
@click.option("--fixtures-dir", type=click.Path(file_okay=False), default=None)
@click.option("--mode", type=click.Choice(["live", "replay", "record"]), default=None)
@click.option("--window", "pronoun_window", type=int, default=None, help="Pronoun context window.")
@click.option("--jaccard-threshold", type=float, default=None)
@click.pass_context
def main(ctx, config_path, workspace, fixtures_dir, mode, pronoun_window, jaccard_threshold):
    """Narrative-arc memory toolkit."""
    overrides = {
        "workspace": workspace,
        "fixtures_dir": fixtures_dir,
        "mode": mode,
        "pronoun_window": pronoun_window,
        "jaccard_threshold": jaccard_threshold,
    }
    ctx.ensure_object(dict)
    ctx.obj["config"] = load_config(config_path, overrides=overrides)


@main.command()
@click.option("--series", required=True)
@click.option("--plots-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.pass_context
def ingest(ctx, series, plots_dir):
    """Load plot files (S{ss}E{ee}*.txt) into the workspace as staged documents."""
    config = _config(ctx)
    config.ensure_workspace()
    sid = SeriesId(series)
    count = 0
    try:
        for path in sorted(Path(plots_dir).glob("*.txt")):
            doc = load_episode(path, sid)
            save_document(config.episodes_dir, doc)
            count += 1
            click.echo(json.dumps({"event": "ingested", "episode": str(doc.episode)}))
    except Exception as exc:
        _fail(getattr(exc, "code", "INGEST_ERROR"), str(exc))
    if count == 0:
        _fail("NO_PLOTS", f"no *.txt plot files under {plots_dir}")


@main.command()
@click.option("--series", required=True)
@click.option("--season", type=int, required=True)
@click.option("--episode", type=int, default=None)
@click.pass_context
def preprocess(ctx, series, season, episode):
    """Simplify, resolve pronouns, extract entities, and normalize names."""
    config = _config(ctx)
    sid = SeriesId(series)
    stores = build_stores(config)
    gateway = build_gateway(config)
    keys = [k for k in list_documents(config.episodes_dir, sid) if k.season == season]
    if episode is not None:
        keys = [k for k in keys if k.episode == episode]
    if not keys:
        _fail("NO_DOCUMENTS", f"no staged documents for {series} season {season}")
    try:
        for key in keys:
            doc = load_document(config.episodes_dir, sid, key)
            if doc.status == "loaded":
                doc = simplify_plot(doc, gateway, chunk_size=config.simplify_chunk_size)
                save_document(config.episodes_dir, doc)
            if doc.status == "simplified":
                doc = resolve_pronouns(doc, gateway, window=config.pronoun_window)
                save_document(config.episodes_dir, doc)
            if doc.status == "resolved":
                extraction = extract_entities(doc, gateway)
                mapping = normalize_characters(extraction.proto_entities, stores.relational, sid)
                doc = substitute_names(doc, build_replacements(mapping, stores.relational))
                save_document(config.episodes_dir, doc)
            click.echo(json.dumps({"event": "preprocessed", "episode": str(key), "status": doc.status}))
    except Exception as exc:
        _fail(getattr(exc, "code", "PREPROCESS_ERROR"), str(exc))
    finally:
        stores.close()


@main.command()
@click.option("--series", required=True)
@click.option("--season", type=int, required=True)
@click.option("--episode", type=int, default=None)
@click.option("--force", is_flag=True, default=False)
@click.pass_context
def extract(ctx, series, season, episode, force):
    """Run the nine-agent extraction over a season (or one episode).

    Progress events are emitted as JSON lines on stdout."""
    config = _config(ctx)
    sid = SeriesId(series)
    stores = build_stores(config)
    gateway = build_gateway(config)
    try:
        run_season(
            series=sid,
            season=season,
            stores=stores,
            gateway=gateway,
            config=config,
            force=force,
            episode=episode,
            on_event=lambda event: click.echo(json.dumps(event, ensure_ascii=False)),
        )
    except Exception as exc:
        _fail(getattr(exc, "code", "EXTRACT_ERROR"), str(exc))
    finally:
        stores.close()


@main.command()
@click.option("--series", required=True)
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--overrides", "overrides_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def evaluate(ctx, series, gold_path, overrides_path, out):
    """Compare the extracted arcs and characters against a gold standard."""
    config = _config(ctx)
    sid = SeriesId(series)
    stores = build_stores(config)
    try:
        gold_data = json.loads(Path(gold_path).read_text("utf-8"))
        if overrides_path:
            gold_data["mapping_overrides"] = json.loads(Path(overrides_path).read_text("utf-8"))
        gold = GoldStandard.from_json(gold_data)
        arcs = [stores.relational.load_arc(a) for a in stores.relational.list_arc_ids(sid)]
        names = [c.preferred_name for c in stores.relational.list_characters(sid)]
        matching = match_arcs(arcs, gold, stores.vectors.embedder, threshold=config.match_threshold)
        report = compute_report(matching, arcs, gold, extracted_characters=names)
        payload = report.to_json()
        if out:
            Path(out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
        click.echo(report.render_table(), err=True)
    except Exception as exc:
        _fail(getattr(exc, "code", "EVALUATE_ERROR"), str(exc))
    finally:
        stores.close()


@main.command()
@click.option("--series", default=None)
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def export(ctx, series, out):
    """Canonical JSON dump of all arcs, byte-stable across runs."""
    config = _config(ctx)
    stores = build_stores(config)
    try:
        payload = export_arcs(stores, SeriesId(series) if series else None)
        text = render_export(payload)
        if out:
            Path(out).write_text(text, "utf-8")
        else:
            click.echo(text, nl=False)
    except Exception as exc:
        _fail(getattr(exc, "code", "EXPORT_ERROR"), str(exc))
    finally:
        stores.close()


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.pass_context
def serve(ctx, host, port):
    """Serve the curation API (and the UI when frontend/dist exists)."""
    import uvicorn

    from .service import create_app

    config = _config(ctx)
    app = create_app(config)
    uvicorn.run(app, host=host or config.host, port=port or config.port, log_level="warning")


if __name__ == "__main__":
    main()
