"""The music library: durable, append-only session history with comparisons.

Entries live in a single embedded SQLite file; rendered artifacts live in a
content-addressed blob directory next to it. Saving is transactional, so an
interrupted save leaves the previous state fully intact, and history is
append-only: re-saving a session may add sketches and results but can never
rewrite what is already archived.
"""

from __future__ import annotations

import hashlib
import json
import sqlite3
import threading
import zipfile
from collections import defaultdict
from contextlib import closing
from pathlib import Path
from typing import Any, Callable

from . import midifile
from .model import AttributeSet, RenderResult, SessionEntry, SymbolicPrompt

_SCHEMA = """
CREATE TABLE IF NOT EXISTS sessions (
    session_id TEXT PRIMARY KEY,
    created_at TEXT NOT NULL,
    intent_text TEXT NOT NULL,
    plan TEXT NOT NULL,
    parent_session TEXT
);
CREATE TABLE IF NOT EXISTS sketches (
    session_id TEXT NOT NULL,
    seq INTEGER NOT NULL,
    data TEXT NOT NULL,
    PRIMARY KEY (session_id, seq)
);
CREATE TABLE IF NOT EXISTS results (
    session_id TEXT NOT NULL,
    seq INTEGER NOT NULL,
    data TEXT NOT NULL,
    PRIMARY KEY (session_id, seq)
);
"""


class StorageFailure(Exception):
    """Save could not complete; prior library state is untouched."""


class UnknownSession(Exception):
    """Referenced session id does not exist."""


class SessionLibrary:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.db_path = self.root / "library.db"
        self.blobs_dir = self.root / "blobs"
        self.blobs_dir.mkdir(exist_ok=True)
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()
        # Test hook: called with a stage name at points inside the save
        # transaction; raising simulates an I/O fault.
        self.fault_hook: Callable[[str], None] | None = None
        with closing(self._connect()) as conn:
            conn.executescript(_SCHEMA)

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.db_path)
        conn.isolation_level = None  # transactions are managed explicitly
        conn.execute("PRAGMA foreign_keys = ON")
        return conn

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks[session_id]

    # -- blobs ---------------------------------------------------------------

    def _import_artifact(self, ref: str, created: list[Path]) -> str:
        """Ensure an artifact lives in the blob directory; return its ref."""
        path = Path(ref)
        if not path.exists():
            raise StorageFailure(f"artifact {ref!r} does not exist")
        if path.parent.resolve() == self.blobs_dir.resolve():
            return str(path)
        data = path.read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        target = self.blobs_dir / f"{digest}{path.suffix or '.bin'}"
        if not target.exists():
            target.write_bytes(data)
            created.append(target)
        return str(target)

    # -- save ----------------------------------------------------------------

    def save_session(self, entry: SessionEntry) -> str:
        """Persist an entry durably; append-only with respect to prior saves.

        Artifacts referenced from outside the blob directory are imported
        into it (content-addressed), and the stored entry points at the
        imported copies. Raises UnknownSession for a missing parent and
        StorageFailure if anything goes wrong mid-save, in which case the
        previous state remains fully readable.
        """
        with self._lock_for(entry.session_id):
            return self._save_locked(entry)

    def _save_locked(self, entry: SessionEntry) -> str:
        existing = self._load_or_none(entry.session_id)
        if existing is not None:
            self._check_append_only(existing, entry)
        if entry.parent_session is not None and existing is None:
            self._check_lineage(entry)

        new_blobs: list[Path] = []
        conn = self._connect()
        try:
            results_json: list[str] = []
            for result in entry.results:
                data = result.to_dict()
                data["output_ref"] = self._import_artifact(result.output_ref, new_blobs)
                results_json.append(json.dumps(data))

            conn.execute("BEGIN")
            conn.execute(
                "INSERT OR IGNORE INTO sessions "
                "(session_id, created_at, intent_text, plan, parent_session) "
                "VALUES (?, ?, ?, ?, ?)",
                (
                    entry.session_id,
                    entry.created_at,
                    entry.intent_text,
                    json.dumps(entry.plan.to_dict()),
                    entry.parent_session,
                ),
            )
            self._stage("session-row")
            start = len(existing.sketches) if existing else 0
            for seq in range(start, len(entry.sketches)):
                conn.execute(
                    "INSERT INTO sketches (session_id, seq, data) VALUES (?, ?, ?)",
                    (entry.session_id, seq, json.dumps(entry.sketches[seq].to_dict())),
                )
            self._stage("sketch-rows")
            start = len(existing.results) if existing else 0
            for seq in range(start, len(entry.results)):
                conn.execute(
                    "INSERT INTO results (session_id, seq, data) VALUES (?, ?, ?)",
                    (entry.session_id, seq, results_json[seq]),
                )
            self._stage("pre-commit")
            conn.commit()
        except StorageFailure:
            conn.rollback()
            self._cleanup(new_blobs)
            raise
        except Exception as exc:
            conn.rollback()
            self._cleanup(new_blobs)
            raise StorageFailure(str(exc)) from exc
        finally:
            conn.close()
        return entry.session_id

    def _stage(self, name: str) -> None:
        if self.fault_hook is not None:
            self.fault_hook(name)

    @staticmethod
    def _cleanup(paths: list[Path]) -> None:
        for path in paths:
            try:
                path.unlink()
            except OSError:
                pass

    def _check_append_only(self, existing: SessionEntry, entry: SessionEntry) -> None:
        frozen = (
            existing.created_at == entry.created_at
            and existing.intent_text == entry.intent_text
            and existing.plan == entry.plan
            and existing.parent_session == entry.parent_session
        )
        if not frozen:
            raise StorageFailure("history rewrite rejected: session fields are immutable")
        if tuple(entry.sketches[: len(existing.sketches)]) != existing.sketches:
            raise StorageFailure("history rewrite rejected: stored sketches changed")
        stored_refs = [r.output_ref for r in existing.results]
        new_refs = [r.output_ref for r in entry.results[: len(existing.results)]]
        if stored_refs != new_refs:
            raise StorageFailure("history rewrite rejected: stored results changed")

    def _check_lineage(self, entry: SessionEntry) -> None:
        seen = {entry.session_id}
        cursor: str | None = entry.parent_session
        with closing(self._connect()) as conn:
            while cursor is not None:
                if cursor in seen:
                    raise StorageFailure(f"lineage cycle through {cursor!r}")
                seen.add(cursor)
                row = conn.execute(
                    "SELECT parent_session FROM sessions WHERE session_id = ?", (cursor,)
                ).fetchone()
                if row is None:
                    raise UnknownSession(f"parent session {cursor!r} not found")
                cursor = row[0]

    # -- load ----------------------------------------------------------------

    def _load_or_none(self, session_id: str) -> SessionEntry | None:
        with closing(self._connect()) as conn:
            row = conn.execute(
                "SELECT created_at, intent_text, plan, parent_session "
                "FROM sessions WHERE session_id = ?",
                (session_id,),
            ).fetchone()
            if row is None:
                return None
            sketches = [
                SymbolicPrompt.from_dict(json.loads(r[0]))
                for r in conn.execute(
                    "SELECT data FROM sketches WHERE session_id = ? ORDER BY seq",
                    (session_id,),
                )
            ]
            results = [
                RenderResult.from_dict(json.loads(r[0]))
                for r in conn.execute(
                    "SELECT data FROM results WHERE session_id = ? ORDER BY seq",
                    (session_id,),
                )
            ]
        return SessionEntry(
            session_id=session_id,
            created_at=row[0],
            intent_text=row[1],
            plan=AttributeSet.from_dict(json.loads(row[2])),
            sketches=tuple(sketches),
            results=tuple(results),
            parent_session=row[3],
        )

    def load_session(self, session_id: str) -> SessionEntry:
        entry = self._load_or_none(session_id)
        if entry is None:
            raise UnknownSession(f"session {session_id!r} not found")
        return entry

    # -- listing and diffing ---------------------------------------------------

    def list_sessions(
        self,
        root: str | None = None,
        since: str | None = None,
        until: str | None = None,
    ) -> list[dict[str, Any]]:
        """Newest-first summaries, optionally limited to one revision tree."""
        with closing(self._connect()) as conn:
            rows = conn.execute(
                "SELECT session_id, created_at, intent_text, parent_session "
                "FROM sessions ORDER BY created_at DESC, rowid DESC"
            ).fetchall()
            lineage: set[str] | None = None
            if root is not None:
                if conn.execute(
                    "SELECT 1 FROM sessions WHERE session_id = ?", (root,)
                ).fetchone() is None:
                    raise UnknownSession(f"session {root!r} not found")
                children: dict[str, list[str]] = defaultdict(list)
                for sid, _, _, parent in rows:
                    if parent:
                        children[parent].append(sid)
                lineage = set()
                frontier = [root]
                while frontier:
                    node = frontier.pop()
                    if node in lineage:
                        continue
                    lineage.add(node)
                    frontier.extend(children.get(node, ()))

            summaries = []
            for sid, created_at, intent_text, parent in rows:
                if lineage is not None and sid not in lineage:
                    continue
                if since is not None and created_at < since:
                    continue
                if until is not None and created_at > until:
                    continue
                last = conn.execute(
                    "SELECT data FROM results WHERE session_id = ? ORDER BY seq DESC LIMIT 1",
                    (sid,),
                ).fetchone()
                overall = None
                if last is not None:
                    overall = json.loads(last[0])["report"]["overall_match"]
                summaries.append(
                    {
                        "session_id": sid,
                        "created_at": created_at,
                        "intent_text": intent_text,
                        "parent_session": parent,
                        "overall_match": overall,
                    }
                )
        return summaries

    def diff_sessions(self, a: str, b: str) -> dict[str, Any]:
        """Attribute, provenance, and alignment deltas between two sessions."""
        entry_a = self.load_session(a)
        entry_b = self.load_session(b)

        plan_changes: list[dict[str, Any]] = []
        attrs_a = {attr.id: attr for attr in entry_a.plan.attributes}
        attrs_b = {attr.id: attr for attr in entry_b.plan.attributes}
        for attr_id in list(attrs_a) + [i for i in attrs_b if i not in attrs_a]:
            in_a = attrs_a.get(attr_id)
            in_b = attrs_b.get(attr_id)
            if in_a is not None and in_b is not None:
                if in_a.value == in_b.value and in_a.weight == in_b.weight:
                    continue
            plan_changes.append(
                {
                    "id": attr_id,
                    "a_value": in_a.value if in_a else None,
                    "b_value": in_b.value if in_b else None,
                    "a_weight": in_a.weight if in_a else None,
                    "b_weight": in_b.weight if in_b else None,
                }
            )

        def last_rules(entry: SessionEntry) -> list[str]:
            if not entry.sketches:
                return []
            return list(entry.sketches[-1].provenance.applied_rules)

        sketch_delta = {
            "a_count": len(entry_a.sketches),
            "b_count": len(entry_b.sketches),
            "a_rules": last_rules(entry_a),
            "b_rules": last_rules(entry_b),
        }

        def last_report(entry: SessionEntry) -> dict[str, bool] | None:
            if not entry.results:
                return None
            report = entry.results[-1].report
            return {e.attribute_id: e.matched for e in report.per_attribute}

        report_a = last_report(entry_a)
        report_b = last_report(entry_b)
        alignment_changes: list[dict[str, Any]] = []
        if report_a is not None and report_b is not None:
            for attr_id in sorted(set(report_a) | set(report_b)):
                if report_a.get(attr_id) != report_b.get(attr_id):
                    alignment_changes.append(
                        {
                            "id": attr_id,
                            "a_matched": report_a.get(attr_id),
                            "b_matched": report_b.get(attr_id),
                        }
                    )
        overall = {
            "a_overall": entry_a.results[-1].report.overall_match if entry_a.results else None,
            "b_overall": entry_b.results[-1].report.overall_match if entry_b.results else None,
        }

        empty = (
            not plan_changes
            and not alignment_changes
            and sketch_delta["a_count"] == sketch_delta["b_count"]
            and sketch_delta["a_rules"] == sketch_delta["b_rules"]
            and overall["a_overall"] == overall["b_overall"]
        )
        return {
            "a": a,
            "b": b,
            "plan_changes": plan_changes,
            "sketches": sketch_delta,
            "alignment_changes": alignment_changes,
            "alignment_overall": overall,
            "empty": empty,
        }

    # -- maintenance -----------------------------------------------------------

    def referenced_blobs(self) -> dict[str, list[str]]:
        """Map blob filename to the session ids that reference it."""
        refs: dict[str, list[str]] = defaultdict(list)
        with closing(self._connect()) as conn:
            for sid, data in conn.execute("SELECT session_id, data FROM results"):
                ref = Path(json.loads(data)["output_ref"])
                refs[ref.name].append(sid)
        return dict(refs)

    def repair_scan(self, delete_orphans: bool = False) -> dict[str, Any]:
        """Verify every stored blob is referenced and every reference resolves."""
        refs = self.referenced_blobs()
        on_disk = {p.name for p in self.blobs_dir.iterdir() if p.is_file()}
        orphans = sorted(on_disk - set(refs))
        missing = sorted(set(refs) - on_disk)
        shared = sorted(name for name, sids in refs.items() if len(set(sids)) > 1)
        if delete_orphans:
            for name in orphans:
                (self.blobs_dir / name).unlink()
        return {"orphans": orphans, "missing": missing, "shared": shared}

    def export_session(self, session_id: str, out_path: str | Path) -> Path:
        """Zip one session: plan, sketch MIDI files, results and reports."""
        entry = self.load_session(session_id)
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with zipfile.ZipFile(out_path, "w", zipfile.ZIP_DEFLATED) as zf:
            zf.writestr("session.json", json.dumps(entry.to_dict(), indent=2))
            for i, sketch in enumerate(entry.sketches):
                zf.writestr(f"sketches/sketch-{i}.mid", midifile.write_midi(sketch))
            for i, result in enumerate(entry.results):
                blob = Path(result.output_ref)
                if blob.exists():
                    zf.writestr(f"outputs/{blob.name}", blob.read_bytes())
                zf.writestr(
                    f"reports/report-{i}.json", json.dumps(result.report.to_dict(), indent=2)
                )
        return out_path
