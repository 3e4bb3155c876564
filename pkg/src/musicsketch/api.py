"""HTTP facade over the full loop: interpret, sketch, render, archive, compare.

All bodies and replies are plain JSON mirroring the core types' canonical
encodings; errors are structured as {"code": ..., "message": ...} with the
HTTP status carrying the class of failure. The server holds no edit state:
every call re-validates the plan it is given.
"""

from __future__ import annotations

import base64
import datetime as dt
import uuid
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import interpreter, library, refiner, renderer, store, vocabulary
from .model import (
    AttributeSet,
    RenderResult,
    SessionEntry,
    SymbolicPrompt,
    ValidationError,
    validate_attribute_set,
)


def _error(status: int, code: str, message: str, **extra: Any) -> JSONResponse:
    return JSONResponse({"code": code, "message": message, **extra}, status_code=status)


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


def create_app(
    corpus_dir: str | Path,
    store_dir: str | Path,
    llm_backend: interpreter.InterpreterBackend | None = None,
    lmm_backend: renderer.RenderBackend | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="musicsketch", version="0.1.0")
    db = store.SegmentDatabase.open(corpus_dir)
    sessions = library.SessionLibrary(store_dir)
    audit_path = Path(store_dir) / "audit.ndjson"

    def parse_plan(payload: dict[str, Any]) -> AttributeSet | JSONResponse:
        raw = payload.get("plan")
        if not isinstance(raw, dict):
            return _error(422, "invalid_plan", "body needs a plan object")
        try:
            plan = AttributeSet.from_dict(raw)
        except (KeyError, TypeError, ValueError) as exc:
            return _error(422, "invalid_plan", f"malformed plan: {exc}")
        violations = [v.to_dict() for v in validate_attribute_set(plan)]
        if violations:
            return _error(422, "invalid_plan", "plan fails validation", violations=violations)
        return plan

    @app.post("/interpret")
    async def interpret_intent(request: Request) -> Any:
        payload = await request.json()
        text = payload.get("text", "")
        if not isinstance(text, str) or not text.strip():
            return _error(422, "empty_intent", "intent text is empty")
        if llm_backend is not None:
            try:
                plan = interpreter.interpret(text, llm_backend)
                return {"plan": plan.to_dict(), "fallback_used": False}
            except interpreter.BackendUnavailable as exc:
                plan = interpreter.interpret(text)
                return JSONResponse(
                    {
                        "plan": plan.to_dict(),
                        "fallback_used": True,
                        "code": "backend_unavailable",
                        "message": str(exc),
                    },
                    status_code=503,
                )
            except interpreter.MalformedBackendOutput:
                plan = interpreter.interpret(text)
                return {"plan": plan.to_dict(), "fallback_used": True}
        plan = interpreter.interpret(text)
        return {"plan": plan.to_dict(), "fallback_used": False}

    @app.post("/sketch")
    async def sketch(request: Request) -> Any:
        payload = await request.json()
        plan = parse_plan(payload)
        if isinstance(plan, JSONResponse):
            return plan
        questions: list[str] = []
        prior_id = payload.get("prior_session")
        if prior_id:
            try:
                prior = sessions.load_session(prior_id)
            except library.UnknownSession as exc:
                return _error(404, "unknown_session", str(exc))
            questions = interpreter.reflective_question(prior.plan, plan)
        try:
            segment = store.retrieve(plan, db)
            prompt = refiner.refine(segment, plan, rule_order=payload.get("rule_order"))
        except store.EmptyDatabase as exc:
            return _error(409, "empty_database", str(exc))
        except refiner.RuleFailure as exc:
            return _error(422, "rule_failure", str(exc))
        midi = renderer.emit_midi(prompt)
        return {
            "prompt": prompt.to_dict(),
            "midi_base64": base64.b64encode(midi).decode("ascii"),
            "provenance": prompt.provenance.to_dict(),
            "reflective_questions": questions,
        }

    @app.post("/render")
    async def render_prompt(request: Request) -> Any:
        payload = await request.json()
        plan = parse_plan(payload)
        if isinstance(plan, JSONResponse):
            return plan
        try:
            prompt = SymbolicPrompt.from_dict(payload.get("prompt", {}))
        except (KeyError, TypeError, ValueError, ValidationError) as exc:
            return _error(422, "invalid_prompt", f"malformed prompt: {exc}")
        backend_kind = payload.get("backend", "local_synth")
        if backend_kind == "external_lmm":
            if lmm_backend is None:
                return _error(503, "backend_unavailable", "no external render backend configured")
            backend = lmm_backend
        elif backend_kind == "local_synth":
            backend = renderer.RenderBackend()
        else:
            return _error(422, "invalid_backend", f"unknown backend {backend_kind!r}")
        try:
            result = renderer.render(
                prompt, plan, backend, artifact_dir=sessions.blobs_dir, audit_path=audit_path
            )
        except renderer.BackendUnavailable as exc:
            return _error(503, "backend_unavailable", str(exc))
        except renderer.RenderRejected as exc:
            return _error(502, "render_rejected", str(exc))
        return {"result": result.to_dict()}

    @app.post("/sessions")
    async def save_session(request: Request) -> Any:
        payload = await request.json()
        plan = parse_plan(payload)
        if isinstance(plan, JSONResponse):
            return plan
        try:
            entry = SessionEntry(
                session_id=payload.get("session_id") or f"s-{uuid.uuid4().hex[:12]}",
                created_at=payload.get("created_at") or _now(),
                intent_text=payload.get("intent_text", plan.source_text),
                plan=plan,
                sketches=tuple(
                    SymbolicPrompt.from_dict(s) for s in payload.get("sketches", ())
                ),
                results=tuple(
                    RenderResult.from_dict(r) for r in payload.get("results", ())
                ),
                parent_session=payload.get("parent_session"),
            )
        except (KeyError, TypeError, ValueError, ValidationError) as exc:
            return _error(422, "invalid_session", f"malformed session entry: {exc}")
        try:
            session_id = sessions.save_session(entry)
        except library.UnknownSession as exc:
            return _error(404, "unknown_session", str(exc))
        except library.StorageFailure as exc:
            return _error(500, "storage_failure", str(exc))
        return {"session_id": session_id}

    @app.get("/sessions")
    async def list_sessions(root: str | None = None, since: str | None = None, until: str | None = None) -> Any:
        try:
            return {"sessions": sessions.list_sessions(root=root, since=since, until=until)}
        except library.UnknownSession as exc:
            return _error(404, "unknown_session", str(exc))

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str) -> Any:
        try:
            return sessions.load_session(session_id).to_dict()
        except library.UnknownSession as exc:
            return _error(404, "unknown_session", str(exc))

    @app.get("/sessions/{session_id}/diff/{other_id}")
    async def diff(session_id: str, other_id: str) -> Any:
        try:
            return sessions.diff_sessions(session_id, other_id)
        except library.UnknownSession as exc:
            return _error(404, "unknown_session", str(exc))

    @app.get("/rules")
    async def rules() -> Any:
        return {"rules": refiner.rules_catalog()}

    @app.get("/vocabulary")
    async def get_vocabulary() -> Any:
        return vocabulary.vocabulary_dict()

    @app.get("/starters")
    async def starters() -> Any:
        return {"starters": list(interpreter.STARTER_INTENTS)}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
