"""Segment database: ingest tagged MIDI segments, index them, retrieve by plan.

Retrieval is exact weighted tag matching: a plan attribute contributes its
weight when the segment's tag for that attribute equals the planned value
(tempo compares by bucket, key by tonic and mode). The best-scoring segment
wins; ties break to the lexicographically smallest segment id so retrieval
is deterministic and independent of ingestion order.

On disk a database is a directory of ``segments/<id>.mid`` plus
``segments/<id>.json`` sidecars and a ``manifest.json``; the in-memory
inverted index is rebuilt on load.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import replace
from pathlib import Path
from typing import Any

from . import midifile, refiner, theory, vocabulary
from .model import AttributeSet, Provenance, SegmentRecord, canonical_json


class IllegalTag(Exception):
    """Tag uses an unknown attribute id or an out-of-domain value."""


class EmptyDatabase(Exception):
    """Retrieve called against a database with no segments."""


class SegmentDatabase:
    """In-memory segment collection with an optional directory backing it."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else None
        self.records: dict[str, SegmentRecord] = {}
        self._index: dict[str, dict[str, set[str]]] = {}
        self._write_lock = threading.Lock()

    # -- construction ------------------------------------------------------

    @classmethod
    def open(cls, directory: str | Path) -> "SegmentDatabase":
        """Load a corpus directory, rebuilding the index from the records."""
        db = cls(directory)
        manifest_path = db._manifest_path()
        if manifest_path is None or not manifest_path.exists():
            return db
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        for segment_id in manifest.get("segments", []):
            record = db._load_record(segment_id)
            db.records[segment_id] = record
            db._index_record(record)
        return db

    def _segments_dir(self) -> Path | None:
        return self.directory / "segments" if self.directory else None

    def _manifest_path(self) -> Path | None:
        return self.directory / "manifest.json" if self.directory else None

    def _load_record(self, segment_id: str) -> SegmentRecord:
        segments = self._segments_dir()
        assert segments is not None
        midi_bytes = (segments / f"{segment_id}.mid").read_bytes()
        sidecar = json.loads((segments / f"{segment_id}.json").read_text(encoding="utf-8"))
        content = midifile.read_prompt(midi_bytes, provenance=Provenance(segment_id=segment_id))
        return SegmentRecord(segment_id=segment_id, content=content, tags=sidecar["tags"])

    # -- ingest ------------------------------------------------------------

    def ingest(self, midi_bytes: bytes, tags: dict[str, Any]) -> SegmentRecord:
        """Parse, normalize, tag, store and index one segment.

        Raises MidiParseError for malformed bytes and IllegalTag for tags
        outside the vocabulary.
        """
        parsed = midifile.parse_midi(midi_bytes)
        if not parsed.notes:
            raise midifile.MidiParseError("file contains no note events")

        normalized_tags: dict[str, Any] = {}
        for attr_id, value in tags.items():
            if not vocabulary.is_known_attribute(attr_id):
                raise IllegalTag(f"unknown attribute id {attr_id!r}")
            if attr_id == "tempo" and isinstance(value, dict):
                try:
                    value = vocabulary.tempo_value(value.get("bpm"), value.get("bucket"))
                except (ValueError, KeyError, TypeError) as exc:
                    raise IllegalTag(f"bad tempo tag: {exc}") from exc
            if not vocabulary.is_legal_value(attr_id, value):
                raise IllegalTag(f"tag {attr_id}={value!r} outside its value domain")
            normalized_tags[attr_id] = value

        segment_id = "seg-" + hashlib.sha1(
            midi_bytes + canonical_json(normalized_tags).encode()
        ).hexdigest()[:12]
        prompt = midifile.parsed_to_prompt(
            parsed,
            provenance=Provenance(segment_id=segment_id),
            resolve_overlaps=True,
        )
        if parsed.key is None:
            tonic_pc, mode = refiner.detect_key(prompt)
            prompt = replace(prompt, key=theory.key_name(tonic_pc, mode))
        record = SegmentRecord(segment_id=segment_id, content=prompt, tags=normalized_tags)

        with self._write_lock:
            self.records[segment_id] = record
            self._index_record(record)
            self._persist(record)
        return record

    def add_record(self, record: SegmentRecord) -> None:
        """Insert an already-built record (in-memory databases, tests, tools)."""
        with self._write_lock:
            self.records[record.segment_id] = record
            self._index_record(record)
            self._persist(record)

    def _persist(self, record: SegmentRecord) -> None:
        segments = self._segments_dir()
        manifest_path = self._manifest_path()
        if segments is None or manifest_path is None:
            return
        segments.mkdir(parents=True, exist_ok=True)
        # Stored MIDI is the normalized form so a reload reproduces the
        # in-memory record exactly.
        (segments / f"{record.segment_id}.mid").write_bytes(midifile.write_midi(record.content))
        (segments / f"{record.segment_id}.json").write_text(
            json.dumps({"segment_id": record.segment_id, "tags": record.tags}, indent=2),
            encoding="utf-8",
        )
        manifest = {"version": 1, "segments": sorted(self.records)}
        tmp = manifest_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
        tmp.replace(manifest_path)

    # -- index -------------------------------------------------------------

    def _index_record(self, record: SegmentRecord) -> None:
        for attr_id, value in record.tags.items():
            key = vocabulary.canonical_value_key(attr_id, value)
            self._index.setdefault(attr_id, {}).setdefault(key, set()).add(record.segment_id)

    def rebuild_index(self) -> dict[str, dict[str, set[str]]]:
        """Fresh index from records; also what the loader uses."""
        rebuilt: dict[str, dict[str, set[str]]] = {}
        for record in self.records.values():
            for attr_id, value in record.tags.items():
                key = vocabulary.canonical_value_key(attr_id, value)
                rebuilt.setdefault(attr_id, {}).setdefault(key, set()).add(record.segment_id)
        return rebuilt

    def index_snapshot(self) -> dict[str, dict[str, set[str]]]:
        return {a: {k: set(v) for k, v in m.items()} for a, m in self._index.items()}

    def __len__(self) -> int:
        return len(self.records)

    def segment_ids(self) -> list[str]:
        return sorted(self.records)


def score(plan: AttributeSet, record: SegmentRecord) -> float:
    """Weighted indicator sum: how well a segment's tags match the plan."""
    total = 0.0
    for attr in plan.attributes:
        tag = record.tags.get(attr.id)
        if tag is not None and vocabulary.values_match(attr.id, tag, attr.value):
            total += attr.weight
    return total


def retrieve(plan: AttributeSet, db: SegmentDatabase) -> SegmentRecord:
    """Best-scoring segment for the plan; smallest id wins ties."""
    if not db.records:
        raise EmptyDatabase("segment database is empty")
    plan.checked()

    totals: dict[str, float] = {}
    for attr in plan.attributes:
        key = vocabulary.canonical_value_key(attr.id, attr.value)
        for segment_id in db._index.get(attr.id, {}).get(key, ()):
            totals[segment_id] = totals.get(segment_id, 0.0) + attr.weight

    best_score = max(totals.values(), default=0.0)
    if best_score <= 0.0:
        winner = min(db.records)
    else:
        winner = min(sid for sid, value in totals.items() if value == best_score)
    return db.records[winner]


def ingest_directory(db: SegmentDatabase, source: str | Path) -> list[SegmentRecord]:
    """Ingest every <name>.mid + <name>.json pair found under a directory."""
    source = Path(source)
    records = []
    for midi_path in sorted(source.rglob("*.mid")):
        sidecar = midi_path.with_suffix(".json")
        tags: dict[str, Any] = {}
        if sidecar.exists():
            data = json.loads(sidecar.read_text(encoding="utf-8"))
            tags = data.get("tags", data if isinstance(data, dict) else {})
        records.append(db.ingest(midi_path.read_bytes(), tags))
    return records
