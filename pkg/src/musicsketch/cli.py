"""Command-line entry points: serve, ingest, seed, run, rules, export."""

from __future__ import annotations

import datetime as dt
import json
import os
import uuid
from pathlib import Path

import click

from . import interpreter, library, refiner, renderer, seed, store, vocabulary
from .model import SessionEntry

_CORPUS_ENV = "MUSICSKETCH_CORPUS"
_STORE_ENV = "MUSICSKETCH_STORE"
_LLM_ENDPOINT_ENV = "MUSICSKETCH_LLM_ENDPOINT"
_LLM_KEY_ENV = "MUSICSKETCH_LLM_API_KEY"
_LMM_ENDPOINT_ENV = "MUSICSKETCH_LMM_ENDPOINT"
_LMM_KEY_ENV = "MUSICSKETCH_LMM_API_KEY"


def _corpus_option(fn):
    return click.option(
        "--corpus",
        envvar=_CORPUS_ENV,
        default="corpus",
        show_default=True,
        help="Segment corpus directory.",
    )(fn)


def _store_option(fn):
    return click.option(
        "--store",
        envvar=_STORE_ENV,
        default="library",
        show_default=True,
        help="Session library directory.",
    )(fn)


def _llm_backend() -> interpreter.InterpreterBackend | None:
    endpoint = os.environ.get(_LLM_ENDPOINT_ENV)
    if not endpoint:
        return None
    return interpreter.InterpreterBackend(
        kind="external_llm",
        config={"endpoint": endpoint, "api_key": os.environ.get(_LLM_KEY_ENV)},
    )


def _lmm_backend() -> renderer.RenderBackend | None:
    endpoint = os.environ.get(_LMM_ENDPOINT_ENV)
    if not endpoint:
        return None
    return renderer.RenderBackend(
        kind="external_lmm",
        config={"endpoint": endpoint, "api_key": os.environ.get(_LMM_KEY_ENV)},
    )


@click.group()
def main() -> None:
    """Co-creation engine: intent to plan to sketch to rendered session."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--ui", "ui_dir", default=None, help="Static UI bundle to serve at /ui.")
@_corpus_option
@_store_option
def serve(host: str, port: int, ui_dir: str | None, corpus: str, store: str) -> None:  # pragma: no cover - thin wrapper
    """Run the HTTP service."""
    import uvicorn

    from .api import create_app

    app = create_app(
        corpus, store, llm_backend=_llm_backend(), lmm_backend=_lmm_backend(), ui_dir=ui_dir
    )
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.argument("source", type=click.Path(exists=True, file_okay=False))
@_corpus_option
def ingest(source: str, corpus: str) -> None:
    """Ingest every .mid/.json pair under SOURCE into the corpus."""
    db = store.SegmentDatabase.open(corpus)
    records = store.ingest_directory(db, source)
    for record in records:
        click.echo(f"ingested {record.segment_id} ({len(record.content.bars)} bars)")
    click.echo(f"{len(records)} segment(s); corpus now holds {len(db)}")


@main.command("seed")
@click.option("--count", default=20, show_default=True, type=click.IntRange(1, 20))
@_corpus_option
def seed_cmd(count: int, corpus: str) -> None:
    """Build the bundled demo corpus."""
    db = store.SegmentDatabase.open(corpus)
    records = seed.seed_corpus(db, count=count)
    click.echo(f"seeded {len(records)} segment(s) into {corpus}")


@main.command()
@click.option("--text", required=True, help="Free-text creative intent.")
@click.option("--local", is_flag=True, help="Force offline interpretation and rendering.")
@click.option("--parent", default=None, help="Parent session id for revision lineage.")
@click.option("--json", "as_json", is_flag=True, help="Print the session as JSON.")
@_corpus_option
@_store_option
def run(text: str, local: bool, parent: str | None, as_json: bool, corpus: str, store: str) -> None:
    """One-shot pipeline: interpret, sketch, render locally, archive."""
    from . import store as store_mod

    llm = None if local else _llm_backend()
    fallback_used = False
    try:
        if llm is not None:
            try:
                plan = interpreter.interpret(text, llm)
            except (interpreter.BackendUnavailable, interpreter.MalformedBackendOutput):
                plan = interpreter.interpret(text)
                fallback_used = True
        else:
            plan = interpreter.interpret(text)
    except interpreter.EmptyIntent as exc:
        raise click.ClickException(str(exc)) from exc

    db = store_mod.SegmentDatabase.open(corpus)
    try:
        segment = store_mod.retrieve(plan, db)
    except store_mod.EmptyDatabase as exc:
        raise click.ClickException(f"{exc}; run `musicsketch seed` first") from exc
    prompt = refiner.refine(segment, plan)

    sessions = library.SessionLibrary(store)
    backend = (None if local else _lmm_backend()) or renderer.RenderBackend()
    try:
        result = renderer.render(
            prompt,
            plan,
            backend,
            artifact_dir=sessions.blobs_dir,
            audit_path=Path(store) / "audit.ndjson",
        )
    except (renderer.BackendUnavailable, renderer.RenderRejected):
        click.echo("(external renderer unavailable; rendering locally)", err=True)
        result = renderer.render(
            prompt,
            plan,
            renderer.RenderBackend(),
            artifact_dir=sessions.blobs_dir,
            audit_path=Path(store) / "audit.ndjson",
        )
    entry = SessionEntry(
        session_id=f"s-{uuid.uuid4().hex[:12]}",
        created_at=dt.datetime.now(dt.timezone.utc).isoformat(),
        intent_text=text,
        plan=plan,
        sketches=(prompt,),
        results=(result,),
        parent_session=parent,
    )
    session_id = sessions.save_session(entry)

    if as_json:
        click.echo(json.dumps({"session_id": session_id, **entry.to_dict(), "fallback_used": fallback_used}))
        return

    click.echo(f"intent: {text}")
    if fallback_used:
        click.echo("(external interpreter unavailable; lexicon fallback used)")
    click.echo("plan:")
    for attr in plan.attributes:
        shown = vocabulary.display_value(attr.id, attr.value)
        click.echo(f"  {attr.id}: {shown}  [{attr.attr_class.value}, w={attr.weight}]")
        click.echo(f"    {attr.explanation}")
    click.echo(f"sketch: from {prompt.provenance.segment_id}, rules {list(prompt.provenance.applied_rules)}")
    click.echo("alignment:")
    for e in result.report.per_attribute:
        mark = "ok" if e.matched else "MISMATCH"
        click.echo(f"  {e.attribute_id}: requested {e.requested!r} detected {e.detected!r} [{mark}]")
    click.echo(f"overall match: {result.report.overall_match}")
    click.echo(f"session: {session_id}")
    click.echo(f"output: {result.output_ref}")


@main.group()
def rules() -> None:
    """Refinement rule registry."""


@rules.command("list")
def rules_list() -> None:
    """Show every registered refinement rule."""
    for rule in refiner.rules_catalog():
        click.echo(f"{rule['name']:16s} [{rule['applies_to']}] {rule['description']}")


@main.command()
@click.argument("session_id")
@click.option("--out", default=None, help="Output zip path (default <session>.zip).")
@_store_option
def export(session_id: str, out: str | None, store: str) -> None:
    """Export one session (plan, sketches, outputs, reports) as a zip."""
    sessions = library.SessionLibrary(store)
    try:
        path = sessions.export_session(session_id, out or f"{session_id}.zip")
    except library.UnknownSession as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"exported {session_id} to {path}")


if __name__ == "__main__":
    main()
