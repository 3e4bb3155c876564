"""Rendering and alignment: make the sketch audible, tie the output to the plan.

The local backend emits the symbolic prompt itself as a deterministic MIDI
file, so an offline deployment always has a playable artifact. The external
backend posts the sketch to a configured large-music-model endpoint and
stores whatever audio comes back, with an audit record per attempt. Either
way the result carries an alignment report mapping every plan attribute to
what is actually detectable in the sketch.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import httpx

from . import interpreter, midifile, refiner, theory, vocabulary
from .model import (
    AlignmentEntry,
    AlignmentReport,
    AttributeSet,
    RenderResult,
    SymbolicPrompt,
    canonical_json,
)

DEFAULT_TIMEOUT_SECONDS = 60.0
DEFAULT_MAX_INFLIGHT = 4


class BackendUnavailable(Exception):
    """External render endpoint unreachable; callers may re-render locally."""


class RenderRejected(Exception):
    """External render endpoint refused the payload."""


@dataclass(frozen=True)
class RenderBackend:
    """local_synth needs nothing; external_lmm needs an endpoint (or a test
    "send" callable in config: send(payload) -> (status, content_bytes))."""

    kind: str = "local_synth"
    config: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("local_synth", "external_lmm"):
            raise ValueError(f"unknown render backend {self.kind!r}")
        if self.kind == "external_lmm" and not (
            self.config.get("endpoint") or self.config.get("send")
        ):
            raise ValueError("external_lmm backend needs an endpoint")


_inflight_locks: dict[str, threading.BoundedSemaphore] = {}
_inflight_guard = threading.Lock()


def _semaphore_for(endpoint: str, limit: int) -> threading.BoundedSemaphore:
    with _inflight_guard:
        if endpoint not in _inflight_locks:
            _inflight_locks[endpoint] = threading.BoundedSemaphore(limit)
        return _inflight_locks[endpoint]


def emit_midi(prompt: SymbolicPrompt) -> bytes:
    """The sketch as format-0 MIDI bytes; re-parsing reproduces the prompt."""
    return midifile.write_midi(prompt)


# ---------------------------------------------------------------------------
# Alignment
# ---------------------------------------------------------------------------

_NOT_VERIFIABLE = "not mechanically verifiable"


def _detect_for(attr_id: str, prompt: SymbolicPrompt) -> Any:
    """Detected value for a mechanically checkable attribute."""
    if attr_id == "key":
        return refiner.detect_key_name(prompt)
    if attr_id == "tempo":
        return {"bpm": prompt.tempo_bpm, "bucket": vocabulary.bucket_for_bpm(prompt.tempo_bpm)}
    if attr_id == "meter":
        return theory.meter_name(prompt.meter)
    if attr_id == "density":
        return refiner.detect_density(prompt)
    return refiner.detect_rhythm(prompt)


def align(prompt: SymbolicPrompt, plan: AttributeSet) -> AlignmentReport:
    """One report entry per plan attribute, detected from the prompt itself.

    Descriptive attributes cannot be measured in symbolic material; they are
    marked as such and matched against what the refinement provenance says
    was honored. Only global attributes decide overall_match.
    """
    entries: list[AlignmentEntry] = []
    provenance_notes = set(prompt.provenance.notes)
    for attr in plan.attributes:
        explanation = interpreter.explanation_for(attr.id, attr.value)
        if attr.attr_class.value == "descriptive":
            matched = f"{attr.id}={attr.value}" in provenance_notes
            entries.append(
                AlignmentEntry(attr.id, attr.value, _NOT_VERIFIABLE, matched, explanation)
            )
            continue
        if attr.id == "chord_progression":
            reading = refiner.detect_progression(prompt)
            if reading is None:
                entries.append(
                    AlignmentEntry(attr.id, attr.value, "no block chords detected", False, explanation)
                )
                continue
            numerals = attr.value.split("-")
            expected = [numerals[b % len(numerals)] for b, _ in reading]
            detected = "-".join(numeral for _, numeral in reading)
            entries.append(
                AlignmentEntry(
                    attr.id, attr.value, detected, [n for _, n in reading] == expected, explanation
                )
            )
            continue
        detected = _detect_for(attr.id, prompt)
        if attr.id == "tempo":
            matched = detected["bpm"] == attr.value["bpm"]
        else:
            matched = detected == attr.value
        entries.append(AlignmentEntry(attr.id, attr.value, detected, matched, explanation))

    overall = all(
        e.matched
        for e in entries
        if vocabulary.attribute_class(e.attribute_id) == "global"
    )
    return AlignmentReport(per_attribute=tuple(entries), overall_match=overall)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _audit(audit_path: str | Path | None, record: dict[str, Any]) -> None:
    if audit_path is None:
        return
    path = Path(audit_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def _text_prompt(plan: AttributeSet) -> str:
    parts = [f"{a.id}: {vocabulary.display_value(a.id, a.value)}" for a in plan.attributes]
    summary = "; ".join(parts)
    return f"{summary}. Intent: {plan.source_text}" if plan.source_text else summary


def _default_send(backend: RenderBackend) -> Callable[[dict[str, Any]], tuple[int, bytes]]:
    endpoint = backend.config["endpoint"]
    timeout = float(backend.config.get("timeout", DEFAULT_TIMEOUT_SECONDS))
    headers = {}
    if backend.config.get("api_key"):
        headers["Authorization"] = f"Bearer {backend.config['api_key']}"

    def send(payload: dict[str, Any]) -> tuple[int, bytes]:
        response = httpx.post(endpoint, json=payload, headers=headers, timeout=timeout)
        return response.status_code, response.content

    return send


def render(
    prompt: SymbolicPrompt,
    plan: AttributeSet,
    backend: RenderBackend | None = None,
    artifact_dir: str | Path = ".",
    audit_path: str | Path | None = None,
) -> RenderResult:
    """Produce the output artifact and its alignment report.

    Local rendering is deterministic: identical prompts yield byte-identical
    files at content-addressed paths. External rendering posts the sketch and
    plan to the configured endpoint, records an audit line whether or not the
    call succeeds, and never persists partial artifacts on failure.
    """
    backend = backend or RenderBackend()
    plan.checked()
    artifact_dir = Path(artifact_dir)
    artifact_dir.mkdir(parents=True, exist_ok=True)
    report = align(prompt, plan)

    if backend.kind == "local_synth":
        data = emit_midi(prompt)
        path = artifact_dir / f"{hashlib.sha256(data).hexdigest()}.mid"
        path.write_bytes(data)
        return RenderResult(output_ref=str(path), backend="local_synth", report=report)

    payload = {
        "symbolic_prompt": prompt.to_dict(),
        "plan": plan.to_dict(),
        "text_prompt": _text_prompt(plan),
    }
    request_hash = hashlib.sha256(canonical_json(payload).encode()).hexdigest()
    endpoint = backend.config.get("endpoint", "test://send")
    limit = int(backend.config.get("max_inflight", DEFAULT_MAX_INFLIGHT))
    send = backend.config.get("send") or _default_send(backend)
    stamp = dt.datetime.now(dt.timezone.utc).isoformat()

    semaphore = _semaphore_for(endpoint, limit)
    with semaphore:
        try:
            status, content = send(payload)
        except httpx.HTTPError as exc:
            _audit(audit_path, {"ts": stamp, "backend": endpoint, "request_hash": request_hash, "outcome": "unreachable"})
            raise BackendUnavailable(str(exc)) from exc
    if status >= 500:
        _audit(audit_path, {"ts": stamp, "backend": endpoint, "request_hash": request_hash, "outcome": f"http_{status}"})
        raise BackendUnavailable(f"backend returned HTTP {status}")
    if status != 200:
        _audit(audit_path, {"ts": stamp, "backend": endpoint, "request_hash": request_hash, "outcome": f"rejected_{status}"})
        raise RenderRejected(f"backend refused payload with HTTP {status}")

    path = artifact_dir / f"{hashlib.sha256(content).hexdigest()}.audio"
    path.write_bytes(content)
    _audit(audit_path, {"ts": stamp, "backend": endpoint, "request_hash": request_hash, "outcome": "ok"})
    return RenderResult(
        output_ref=str(path),
        backend="external_lmm",
        report=report,
        request_hash=request_hash,
        caveats=("alignment checked on the symbolic sketch, not the rendered audio",),
    )
