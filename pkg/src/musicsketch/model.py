"""Core domain types shared by every stage of the co-creation pipeline.

All types are immutable values. Note-level and prompt-level types validate
themselves at construction and raise :class:`ValidationError` with structured
violations. Attribute plans are deliberately permissive at construction so
that :func:`validate_attribute_set` can report problems instead of making
broken plans unrepresentable; pipeline entry points call
:meth:`AttributeSet.checked` before acting on a plan.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterator

from . import theory, vocabulary

TICKS_PER_QUARTER = 480

# Rule names a prompt's provenance may carry; the refiner registers an
# implementation for each of these.
RULE_NAMES = (
    "transpose_key",
    "convert_mode",
    "reroot_chords",
    "set_tempo",
    "set_meter",
    "adjust_density",
    "apply_swing",
    "shape_velocity",
)

RENDER_BACKENDS = ("local_synth", "external_lmm")


class AttributeClass(str, Enum):
    DESCRIPTIVE = "descriptive"
    GLOBAL = "global"
    LOCAL = "local"


@dataclass(frozen=True)
class Violation:
    """One broken invariant: which subject, which rule, human-readable why."""

    subject: str
    rule: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"subject": self.subject, "rule": self.rule, "message": self.message}


class ValidationError(Exception):
    """Raised when a constructor or checkpoint rejects a value."""

    def __init__(self, violations: list[Violation] | None = None, message: str = ""):
        self.violations = violations or []
        detail = message or "; ".join(
            f"{v.subject}: {v.rule} ({v.message})" for v in self.violations
        )
        super().__init__(detail or "validation failed")


def _fail(subject: str, rule: str, message: str) -> None:
    raise ValidationError([Violation(subject, rule, message)])


# ---------------------------------------------------------------------------
# Attribute plan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Attribute:
    """One planned musical parameter with its weight and guide-role text."""

    id: str
    value: Any
    attr_class: AttributeClass
    weight: float
    explanation: str = ""
    reflective_question: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "value": self.value,
            "class": self.attr_class.value,
            "weight": self.weight,
            "explanation": self.explanation,
        }
        if self.reflective_question is not None:
            out["reflective_question"] = self.reflective_question
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Attribute":
        return cls(
            id=data["id"],
            value=data["value"],
            attr_class=AttributeClass(data["class"]),
            weight=float(data["weight"]),
            explanation=data.get("explanation", ""),
            reflective_question=data.get("reflective_question"),
        )


def make_attribute(
    attr_id: str,
    value: Any,
    weight: float | None = None,
    explanation: str = "",
    reflective_question: str | None = None,
) -> Attribute:
    """Build an attribute with its class and default weight from the vocabulary."""
    if not vocabulary.is_known_attribute(attr_id):
        _fail(attr_id, "unknown_attribute", f"{attr_id!r} is not in the vocabulary")
    if attr_id == "tempo" and isinstance(value, dict):
        value = vocabulary.tempo_value(value.get("bpm"), value.get("bucket"))
    return Attribute(
        id=attr_id,
        value=value,
        attr_class=AttributeClass(vocabulary.attribute_class(attr_id)),
        weight=vocabulary.default_weight(attr_id) if weight is None else weight,
        explanation=explanation,
        reflective_question=reflective_question,
    )


@dataclass(frozen=True)
class AttributeSet:
    """The structured plan interpreted from a free-text intent."""

    attributes: tuple[Attribute, ...]
    source_text: str = ""

    def get(self, attr_id: str) -> Attribute | None:
        for attr in self.attributes:
            if attr.id == attr_id:
                return attr
        return None

    def ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.attributes)

    def checked(self) -> "AttributeSet":
        violations = validate_attribute_set(self)
        if violations:
            raise ValidationError(violations)
        return self

    def to_dict(self) -> dict[str, Any]:
        return {
            "attributes": [a.to_dict() for a in self.attributes],
            "source_text": self.source_text,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AttributeSet":
        return cls(
            attributes=tuple(Attribute.from_dict(a) for a in data["attributes"]),
            source_text=data.get("source_text", ""),
        )


def validate_attribute_set(plan: AttributeSet) -> list[Violation]:
    """Report every broken plan invariant; empty list means the plan is sound."""
    violations: list[Violation] = []
    seen: set[str] = set()
    for attr in plan.attributes:
        if not vocabulary.is_known_attribute(attr.id):
            violations.append(
                Violation(attr.id, "unknown_attribute", "not in the vocabulary")
            )
            continue
        if attr.id in seen:
            violations.append(
                Violation(attr.id, "duplicate_attribute", "appears more than once")
            )
        seen.add(attr.id)
        if not (0.0 <= attr.weight <= 1.0):
            violations.append(
                Violation(attr.id, "weight_bounds", f"weight {attr.weight} outside [0, 1]")
            )
        if not vocabulary.is_legal_value(attr.id, attr.value):
            violations.append(
                Violation(attr.id, "value_domain", f"value {attr.value!r} not in domain")
            )
        if AttributeClass(vocabulary.attribute_class(attr.id)) is not attr.attr_class:
            violations.append(
                Violation(attr.id, "class_mismatch", f"class should be {vocabulary.attribute_class(attr.id)}")
            )
    if not any(
        vocabulary.is_known_attribute(a.id)
        and vocabulary.attribute_class(a.id) == "global"
        for a in plan.attributes
    ):
        violations.append(
            Violation("plan", "missing_global", "no global attribute (tempo/key/meter) present")
        )
    return violations


# ---------------------------------------------------------------------------
# Symbolic prompt
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoteEvent:
    """One note: bar-relative position and length in ticks at 480 tpq."""

    pitch: int
    position: int
    length: int
    velocity: int

    def __post_init__(self) -> None:
        if not 0 <= self.pitch <= 127:
            _fail("note", "pitch_bounds", f"pitch {self.pitch} outside 0..127")
        if self.position < 0:
            _fail("note", "position_bounds", f"position {self.position} negative")
        if self.length < 1:
            _fail("note", "length_bounds", f"length {self.length} < 1")
        if not 1 <= self.velocity <= 127:
            _fail("note", "velocity_bounds", f"velocity {self.velocity} outside 1..127")

    @property
    def end(self) -> int:
        return self.position + self.length

    def to_dict(self) -> dict[str, int]:
        return {
            "pitch": self.pitch,
            "position": self.position,
            "length": self.length,
            "velocity": self.velocity,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "NoteEvent":
        return cls(data["pitch"], data["position"], data["length"], data["velocity"])


@dataclass(frozen=True)
class Provenance:
    """Where a prompt came from: source segment and rules applied to it."""

    segment_id: str | None = None
    applied_rules: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "segment_id": self.segment_id,
            "applied_rules": list(self.applied_rules),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Provenance":
        return cls(
            segment_id=data.get("segment_id"),
            applied_rules=tuple(data.get("applied_rules", ())),
            notes=tuple(data.get("notes", ())),
        )


@dataclass(frozen=True)
class SymbolicPrompt:
    """A bar-indexed MIDI-like sketch: header plus note events per bar."""

    tempo_bpm: int
    key: str
    meter: tuple[int, int]
    bars: tuple[tuple[NoteEvent, ...], ...]
    ticks_per_quarter: int = TICKS_PER_QUARTER
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self) -> None:
        lo, hi = vocabulary.bpm_range()
        if not lo <= self.tempo_bpm <= hi:
            _fail("prompt", "tempo_bounds", f"tempo {self.tempo_bpm} outside {lo}..{hi}")
        if self.key not in theory.ALL_KEYS:
            _fail("prompt", "key_domain", f"key {self.key!r} not one of the 24 keys")
        if theory.meter_name(self.meter) not in (vocabulary.value_domain("meter") or ()):
            _fail("prompt", "meter_domain", f"meter {self.meter} unsupported")
        if self.ticks_per_quarter != TICKS_PER_QUARTER:
            _fail("prompt", "resolution", f"ticks_per_quarter fixed at {TICKS_PER_QUARTER}")
        if not self.bars:
            _fail("prompt", "bars_nonempty", "prompt has no bars")
        tpb = self.ticks_per_bar
        for b, bar in enumerate(self.bars):
            spans: dict[int, list[tuple[int, int]]] = {}
            for note in bar:
                if note.end > tpb:
                    _fail(
                        "prompt",
                        "bar_overflow",
                        f"bar {b}: note ends at {note.end} past bar length {tpb}",
                    )
                spans.setdefault(note.pitch, []).append((note.position, note.end))
            # Same-pitch overlap inside a bar cannot survive a MIDI round trip,
            # so it is rejected here rather than silently mangled later.
            for pitch, ranges in spans.items():
                ranges.sort()
                for (_, end_a), (start_b, _) in zip(ranges, ranges[1:]):
                    if start_b < end_a:
                        _fail(
                            "prompt",
                            "pitch_overlap",
                            f"bar {b}: overlapping notes at pitch {pitch}",
                        )
        unknown = set(self.provenance.applied_rules) - set(RULE_NAMES)
        if unknown:
            _fail("prompt", "unknown_rule", f"provenance rules {sorted(unknown)} not registered")

    @property
    def ticks_per_bar(self) -> int:
        return theory.ticks_per_bar(self.meter, self.ticks_per_quarter)

    def iter_notes(self) -> Iterator[tuple[int, NoteEvent]]:
        for b, bar in enumerate(self.bars):
            for note in bar:
                yield b, note

    def note_count(self) -> int:
        return sum(len(bar) for bar in self.bars)

    def with_provenance(self, provenance: Provenance) -> "SymbolicPrompt":
        return replace(self, provenance=provenance)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tempo_bpm": self.tempo_bpm,
            "key": self.key,
            "meter": theory.meter_name(self.meter),
            "ticks_per_quarter": self.ticks_per_quarter,
            "bars": [[n.to_dict() for n in bar] for bar in self.bars],
            "provenance": self.provenance.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SymbolicPrompt":
        return cls(
            tempo_bpm=data["tempo_bpm"],
            key=data["key"],
            meter=theory.parse_meter(data["meter"]),
            bars=tuple(
                tuple(NoteEvent.from_dict(n) for n in bar) for bar in data["bars"]
            ),
            ticks_per_quarter=data.get("ticks_per_quarter", TICKS_PER_QUARTER),
            provenance=Provenance.from_dict(data.get("provenance", {})),
        )


# ---------------------------------------------------------------------------
# Segment records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SegmentRecord:
    """A database entry: symbolic content plus the tag metadata it matches on."""

    segment_id: str
    content: SymbolicPrompt
    tags: dict[str, Any]

    def __post_init__(self) -> None:
        if not self.segment_id or not all(
            c.isalnum() or c in "-_" for c in self.segment_id
        ):
            _fail("segment", "segment_id", f"bad segment id {self.segment_id!r}")
        for attr_id, value in self.tags.items():
            if not vocabulary.is_known_attribute(attr_id):
                _fail("segment", "unknown_tag", f"tag {attr_id!r} not in vocabulary")
            if not vocabulary.is_legal_value(attr_id, value):
                _fail("segment", "tag_domain", f"tag {attr_id}={value!r} out of domain")

    def to_dict(self) -> dict[str, Any]:
        return {
            "segment_id": self.segment_id,
            "content": self.content.to_dict(),
            "tags": dict(self.tags),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SegmentRecord":
        return cls(
            segment_id=data["segment_id"],
            content=SymbolicPrompt.from_dict(data["content"]),
            tags=dict(data["tags"]),
        )


# ---------------------------------------------------------------------------
# Alignment and render results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlignmentEntry:
    attribute_id: str
    requested: Any
    detected: Any
    matched: bool
    explanation: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "attribute_id": self.attribute_id,
            "requested": self.requested,
            "detected": self.detected,
            "matched": self.matched,
            "explanation": self.explanation,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AlignmentEntry":
        return cls(
            data["attribute_id"],
            data["requested"],
            data["detected"],
            data["matched"],
            data["explanation"],
        )


@dataclass(frozen=True)
class AlignmentReport:
    """Per-attribute comparison of the plan against the produced prompt.

    Only global attributes can fail the report: descriptive and local
    mismatches stay visible as warnings but never flip overall_match.
    """

    per_attribute: tuple[AlignmentEntry, ...]
    overall_match: bool

    def __post_init__(self) -> None:
        expected = all(
            e.matched
            for e in self.per_attribute
            if vocabulary.is_known_attribute(e.attribute_id)
            and vocabulary.attribute_class(e.attribute_id) == "global"
        )
        if self.overall_match != expected:
            _fail(
                "report",
                "overall_match",
                "overall_match must reflect exactly the global-attribute entries",
            )

    def entry(self, attr_id: str) -> AlignmentEntry | None:
        for e in self.per_attribute:
            if e.attribute_id == attr_id:
                return e
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_attribute": [e.to_dict() for e in self.per_attribute],
            "overall_match": self.overall_match,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AlignmentReport":
        return cls(
            per_attribute=tuple(
                AlignmentEntry.from_dict(e) for e in data["per_attribute"]
            ),
            overall_match=data["overall_match"],
        )


@dataclass(frozen=True)
class RenderResult:
    """A produced artifact plus the report tying it back to the plan."""

    output_ref: str
    backend: str
    report: AlignmentReport
    request_hash: str | None = None
    caveats: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.backend not in RENDER_BACKENDS:
            _fail("render", "backend", f"unknown backend {self.backend!r}")
        if not self.output_ref:
            _fail("render", "output_ref", "output_ref is empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "output_ref": self.output_ref,
            "backend": self.backend,
            "report": self.report.to_dict(),
            "request_hash": self.request_hash,
            "caveats": list(self.caveats),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RenderResult":
        return cls(
            output_ref=data["output_ref"],
            backend=data["backend"],
            report=AlignmentReport.from_dict(data["report"]),
            request_hash=data.get("request_hash"),
            caveats=tuple(data.get("caveats", ())),
        )


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SessionEntry:
    """One archived pass through the loop, linked to any revision parent."""

    session_id: str
    created_at: str
    intent_text: str
    plan: AttributeSet
    sketches: tuple[SymbolicPrompt, ...] = ()
    results: tuple[RenderResult, ...] = ()
    parent_session: str | None = None

    def __post_init__(self) -> None:
        if not self.session_id:
            _fail("session", "session_id", "session id is empty")
        if self.parent_session == self.session_id:
            _fail("session", "lineage", "session cannot be its own parent")

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "intent_text": self.intent_text,
            "plan": self.plan.to_dict(),
            "sketches": [s.to_dict() for s in self.sketches],
            "results": [r.to_dict() for r in self.results],
            "parent_session": self.parent_session,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SessionEntry":
        return cls(
            session_id=data["session_id"],
            created_at=data["created_at"],
            intent_text=data["intent_text"],
            plan=AttributeSet.from_dict(data["plan"]),
            sketches=tuple(SymbolicPrompt.from_dict(s) for s in data.get("sketches", ())),
            results=tuple(RenderResult.from_dict(r) for r in data.get("results", ())),
            parent_session=data.get("parent_session"),
        )


def canonical_json(data: Any) -> str:
    """Stable JSON used for hashing and persistence."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))
