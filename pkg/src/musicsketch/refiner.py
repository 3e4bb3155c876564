"""Music-theory refinement: adapt a retrieved segment toward the plan.

Each rule is a pure transform over a prompt. Rules are applied in a fixed
order (pitch-level first, then headers, then rhythm and dynamics) and every
application re-validates the prompt, so an illegal intermediate state
surfaces as a clean RuleFailure instead of a corrupt sketch. The provenance
of the returned prompt names the source segment and every rule that ran.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Callable

import numpy as np

from . import theory
from .midifile import split_into_bars
from .model import (
    AttributeSet,
    NoteEvent,
    Provenance,
    SegmentRecord,
    SymbolicPrompt,
    ValidationError,
)


class EmptyPrompt(Exception):
    """Prompt has no notes to analyze."""


class RuleFailure(Exception):
    """A rule could not produce a legal prompt."""

    def __init__(self, rule: str, message: str, bar_index: int | None = None):
        self.rule = rule
        self.bar_index = bar_index
        where = f" (bar {bar_index})" if bar_index is not None else ""
        super().__init__(f"{rule}: {message}{where}")


# Krumhansl-Kessler tone profiles for major and minor keys.
_MAJOR_PROFILE = np.array(
    [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88]
)
_MINOR_PROFILE = np.array(
    [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17]
)

# Velocity shaping by mood family: subdued moods pull dynamics down,
# energized moods push them up. Clamped to the MIDI velocity range.
MOOD_VELOCITY_FACTORS = {
    "sad": 0.75,
    "calm": 0.75,
    "melancholic": 0.75,
    "happy": 1.15,
    "excited": 1.15,
}


# ---------------------------------------------------------------------------
# Detectors (also used by the alignment report)
# ---------------------------------------------------------------------------


def pitch_class_histogram(prompt: SymbolicPrompt) -> np.ndarray:
    """Duration-weighted pitch-class histogram over the whole prompt."""
    hist = np.zeros(12)
    for _, note in prompt.iter_notes():
        hist[note.pitch % 12] += note.length
    return hist


def detect_key(prompt: SymbolicPrompt) -> tuple[int, str]:
    """Best-correlating key as (tonic pitch class, mode).

    Correlates the duration-weighted pitch-class histogram against the 24
    rotated major/minor profiles; ties resolve to the lower tonic pitch
    class, major before minor.
    """
    hist = pitch_class_histogram(prompt)
    if hist.sum() == 0:
        raise EmptyPrompt("prompt contains no notes")
    if np.ptp(hist) == 0:
        return 0, "major"  # featureless histogram: correlation is undefined
    best: tuple[int, str] = (0, "major")
    best_score = -np.inf
    for tonic_pc in range(12):
        rotated = np.roll(hist, -tonic_pc)
        for mode, profile in (("major", _MAJOR_PROFILE), ("minor", _MINOR_PROFILE)):
            score = float(np.corrcoef(rotated, profile)[0, 1])
            if score > best_score:
                best_score = score
                best = (tonic_pc, mode)
    return best


def detect_key_name(prompt: SymbolicPrompt) -> str:
    tonic_pc, mode = detect_key(prompt)
    return theory.key_name(tonic_pc, mode)


def detect_density(prompt: SymbolicPrompt) -> str:
    per_bar = prompt.note_count() / len(prompt.bars)
    if per_bar < 4:
        return "sparse"
    if per_bar >= 8:
        return "dense"
    return "medium"


def detect_rhythm(prompt: SymbolicPrompt) -> str:
    """Straight vs swing, from where off-beat eighths sit."""
    eighth = prompt.ticks_per_quarter // 2
    swing_offset = eighth // 3
    straight = swung = 0
    for _, note in prompt.iter_notes():
        rel = note.position % prompt.ticks_per_quarter
        if rel == eighth:
            straight += 1
        elif rel == eighth + swing_offset:
            swung += 1
    return "swing" if swung > 0 and swung >= straight else "straight"


def _block_chords(bar: tuple[NoteEvent, ...]) -> list[list[NoteEvent]]:
    """Groups of 3+ notes sharing onset and length (the accompaniment chords)."""
    groups: dict[tuple[int, int], list[NoteEvent]] = {}
    for note in bar:
        groups.setdefault((note.position, note.length), []).append(note)
    return [g for (_, g) in sorted(groups.items()) if len(g) >= 3]


def detect_chord_roots(prompt: SymbolicPrompt) -> list[tuple[int, int]]:
    """(bar index, root pitch class) for each bar that carries a block chord."""
    out: list[tuple[int, int]] = []
    for b, bar in enumerate(prompt.bars):
        chords = _block_chords(bar)
        if chords:
            out.append((b, min(n.pitch for n in chords[0]) % 12))
    return out


def detect_progression(prompt: SymbolicPrompt) -> list[tuple[int, str]] | None:
    """Roman-numeral reading of detected chord roots against the header key."""
    roots = detect_chord_roots(prompt)
    if not roots:
        return None
    tonic_pc, mode = theory.parse_key(prompt.key)
    scale = theory.scale_pcs(tonic_pc, mode)
    numerals_major = ("I", "ii", "iii", "IV", "V", "vi", "vii")
    numerals_minor = ("i", "ii", "III", "iv", "v", "VI", "VII")
    numerals = numerals_major if mode == "major" else numerals_minor
    out: list[tuple[int, str]] = []
    for bar_index, root_pc in roots:
        rel = scale.index(root_pc) if root_pc in scale else None
        if rel is None:
            return None  # chromatic root: no confident reading
        out.append((bar_index, numerals[rel]))
    return out


# ---------------------------------------------------------------------------
# Transform helpers
# ---------------------------------------------------------------------------


def _fold_pitch(pitch: int, rule: str) -> int:
    folded = pitch
    if folded > 127:
        folded -= 12
    elif folded < 0:
        folded += 12
    if not 0 <= folded <= 127:
        raise RuleFailure(rule, f"pitch {pitch} unrecoverable even after octave folding")
    return folded


def _map_pitches(
    prompt: SymbolicPrompt, rule: str, fn: Callable[[NoteEvent], int]
) -> SymbolicPrompt:
    bars: list[tuple[NoteEvent, ...]] = []
    for b, bar in enumerate(prompt.bars):
        try:
            bars.append(tuple(replace(n, pitch=_fold_pitch(fn(n), rule)) for n in bar))
        except RuleFailure as exc:
            raise RuleFailure(rule, str(exc), bar_index=b) from exc
    try:
        return replace(prompt, bars=tuple(bars))
    except ValidationError as exc:
        raise RuleFailure(rule, str(exc)) from exc


def _clamp_velocity(velocity: int, factor: float) -> int:
    return max(1, min(127, math.floor(velocity * factor + 0.5)))


def _flatten_merged(prompt: SymbolicPrompt) -> list[tuple[int, int, int, int]]:
    """Absolute-tick notes with boundary ties re-joined."""
    tpb = prompt.ticks_per_bar
    flat: list[tuple[int, int, int, int]] = []
    for b, note in prompt.iter_notes():
        flat.append((b * tpb + note.position, note.pitch, note.length, note.velocity))
    flat.sort(key=lambda n: (n[0], n[1]))
    merged: list[tuple[int, int, int, int]] = []
    for tick, pitch, length, velocity in flat:
        if merged:
            p_tick, p_pitch, p_len, p_vel = merged[-1]
            if p_pitch == pitch and p_vel == velocity and p_tick + p_len == tick:
                merged[-1] = (p_tick, pitch, p_len + length, velocity)
                continue
        merged.append((tick, pitch, length, velocity))
    return merged


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------


def transpose_key(prompt: SymbolicPrompt, target_key: str) -> SymbolicPrompt:
    """Shift every pitch by the minimal interval onto the target tonic."""
    cur_pc, cur_mode = theory.parse_key(prompt.key)
    target_pc, _ = theory.parse_key(target_key)
    delta = theory.minimal_interval(cur_pc, target_pc)
    if delta == 0:
        return prompt
    shifted = _map_pitches(prompt, "transpose_key", lambda n: n.pitch + delta)
    return replace(shifted, key=theory.key_name(target_pc, cur_mode))


def convert_mode(prompt: SymbolicPrompt, target_key: str) -> SymbolicPrompt:
    """Parallel-mode conversion: remap scale degrees 3, 6 and 7."""
    tonic_pc, cur_mode = theory.parse_key(prompt.key)
    _, target_mode = theory.parse_key(target_key)
    if cur_mode == target_mode:
        return prompt
    source_scale = theory.MAJOR_SCALE if cur_mode == "major" else theory.MINOR_SCALE
    shift_pcs = {source_scale[d] for d in theory.MODE_SHIFT_DEGREES}
    step = -1 if cur_mode == "major" else 1

    def remap(note: NoteEvent) -> int:
        rel = (note.pitch - tonic_pc) % 12
        if rel in shift_pcs:
            return note.pitch + step
        return note.pitch

    converted = _map_pitches(prompt, "convert_mode", remap)
    return replace(converted, key=theory.key_name(tonic_pc, target_mode))


def reroot_chords(prompt: SymbolicPrompt, progression: str) -> SymbolicPrompt:
    """Re-root block chords bar by bar onto the requested progression.

    Bars without a block chord, or where the shift would collide with other
    voices, are left untouched.
    """
    roots = theory.progression_root_pcs(progression, prompt.key)
    new_bars: list[tuple[NoteEvent, ...]] = []
    for b, bar in enumerate(prompt.bars):
        chords = _block_chords(bar)
        if not chords:
            new_bars.append(bar)
            continue
        chord = chords[0]
        target_pc = roots[b % len(roots)]
        delta = theory.minimal_interval(min(n.pitch for n in chord) % 12, target_pc)
        if delta == 0:
            new_bars.append(bar)
            continue
        chord_ids = {id(n) for n in chord}
        moved: list[NoteEvent] = []
        ok = True
        for note in bar:
            if id(note) in chord_ids:
                try:
                    moved.append(replace(note, pitch=_fold_pitch(note.pitch + delta, "reroot_chords")))
                except RuleFailure:
                    ok = False
                    break
            else:
                moved.append(note)
        if ok and not _has_pitch_overlap(moved):
            new_bars.append(tuple(moved))
        else:
            new_bars.append(bar)
    return replace(prompt, bars=tuple(new_bars))


def _has_pitch_overlap(notes: list[NoteEvent]) -> bool:
    spans: dict[int, list[tuple[int, int]]] = {}
    for n in notes:
        spans.setdefault(n.pitch, []).append((n.position, n.end))
    for ranges in spans.values():
        ranges.sort()
        for (_, end_a), (start_b, _) in zip(ranges, ranges[1:]):
            if start_b < end_a:
                return True
    return False


def set_tempo(prompt: SymbolicPrompt, tempo: dict[str, Any]) -> SymbolicPrompt:
    bpm = int(tempo["bpm"])
    if bpm == prompt.tempo_bpm:
        return prompt
    return replace(prompt, tempo_bpm=bpm)


def set_meter(prompt: SymbolicPrompt, meter: str) -> SymbolicPrompt:
    """Re-bar the prompt under a new meter, splitting ties at new boundaries."""
    target = theory.parse_meter(meter)
    if target == prompt.meter:
        return prompt
    flat = _flatten_merged(prompt)
    tpb = theory.ticks_per_bar(target, prompt.ticks_per_quarter)
    end = max((t + length for t, _, length, _ in flat), default=0)
    bar_count = max(1, math.ceil(end / tpb))
    try:
        bars = split_into_bars(flat, tpb, bar_count)
        return replace(prompt, meter=target, bars=bars)
    except ValidationError as exc:
        raise RuleFailure("set_meter", str(exc)) from exc


def adjust_density(prompt: SymbolicPrompt, target: str) -> SymbolicPrompt:
    """Split notes in half toward 'dense'; merge repeated notes toward 'sparse'."""
    if target == "medium" or detect_density(prompt) == target:
        return prompt
    new_bars: list[tuple[NoteEvent, ...]] = []
    if target == "dense":
        for bar in prompt.bars:
            out: list[NoteEvent] = []
            for n in bar:
                if n.length >= 2:
                    half = n.length // 2
                    out.append(replace(n, length=half))
                    out.append(replace(n, position=n.position + half, length=n.length - half))
                else:
                    out.append(n)
            new_bars.append(tuple(sorted(out, key=lambda x: (x.position, x.pitch))))
    else:  # sparse
        for bar in prompt.bars:
            out = []
            for n in sorted(bar, key=lambda x: (x.pitch, x.position)):
                if out and out[-1].pitch == n.pitch and out[-1].end == n.position:
                    out[-1] = replace(out[-1], length=out[-1].length + n.length)
                else:
                    out.append(n)
            new_bars.append(tuple(sorted(out, key=lambda x: (x.position, x.pitch))))
    try:
        return replace(prompt, bars=tuple(new_bars))
    except ValidationError as exc:
        raise RuleFailure("adjust_density", str(exc)) from exc


def apply_swing(prompt: SymbolicPrompt, value: str) -> SymbolicPrompt:
    """Delay every off-beat eighth by a third of an eighth."""
    if value != "swing":
        return prompt
    eighth = prompt.ticks_per_quarter // 2
    delay = eighth // 3
    tpb = prompt.ticks_per_bar
    new_bars: list[tuple[NoteEvent, ...]] = []
    for bar in prompt.bars:
        onsets = sorted((n.position, n.pitch) for n in bar)
        out: list[NoteEvent] = []
        for n in bar:
            if n.position % prompt.ticks_per_quarter != eighth:
                out.append(n)
                continue
            new_pos = n.position + delay
            limit = tpb
            for pos, pitch in onsets:
                if pitch == n.pitch and pos > n.position:
                    limit = min(limit, pos)
                    break
            new_len = min(n.length, limit - new_pos)
            if new_len < 1:
                out.append(n)  # no room to swing this note
            else:
                out.append(replace(n, position=new_pos, length=new_len))
        new_bars.append(tuple(sorted(out, key=lambda x: (x.position, x.pitch))))
    try:
        return replace(prompt, bars=tuple(new_bars))
    except ValidationError as exc:
        raise RuleFailure("apply_swing", str(exc)) from exc


def shape_velocity(prompt: SymbolicPrompt, mood: str) -> SymbolicPrompt:
    factor = MOOD_VELOCITY_FACTORS.get(mood)
    if factor is None:
        return prompt
    bars = tuple(
        tuple(replace(n, velocity=_clamp_velocity(n.velocity, factor)) for n in bar)
        for bar in prompt.bars
    )
    return replace(prompt, bars=bars)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RefinementRule:
    name: str
    applies_to: str
    transform: Callable[[SymbolicPrompt, Any], SymbolicPrompt]
    description: str


RULES: dict[str, RefinementRule] = {
    rule.name: rule
    for rule in (
        RefinementRule(
            "transpose_key", "key", transpose_key,
            "Shift all pitches by the minimal interval onto the requested tonic.",
        ),
        RefinementRule(
            "convert_mode", "key", convert_mode,
            "Switch between parallel major and minor by remapping degrees 3, 6 and 7.",
        ),
        RefinementRule(
            "reroot_chords", "chord_progression", reroot_chords,
            "Re-root block chords onto the requested roman-numeral progression.",
        ),
        RefinementRule(
            "set_tempo", "tempo", set_tempo,
            "Set the header tempo to the requested bpm.",
        ),
        RefinementRule(
            "set_meter", "meter", set_meter,
            "Re-bar the sketch under the requested meter.",
        ),
        RefinementRule(
            "adjust_density", "density", adjust_density,
            "Split notes toward a dense texture or merge repeats toward a sparse one.",
        ),
        RefinementRule(
            "apply_swing", "rhythm_pattern", apply_swing,
            "Delay off-beat eighths by a third of an eighth for a swing feel.",
        ),
        RefinementRule(
            "shape_velocity", "mood", shape_velocity,
            "Scale dynamics down for subdued moods and up for energized ones.",
        ),
    )
}

DEFAULT_RULE_ORDER = tuple(RULES)


def rules_catalog() -> list[dict[str, str]]:
    """Registry listing for the API and CLI."""
    return [
        {"name": r.name, "applies_to": r.applies_to, "description": r.description}
        for r in RULES.values()
    ]


def apply_rule(prompt: SymbolicPrompt, rule_name: str, value: Any) -> SymbolicPrompt:
    """Apply a single registered rule; provenance is left untouched."""
    rule = RULES.get(rule_name)
    if rule is None:
        raise RuleFailure(rule_name, "not a registered rule")
    return rule.transform(prompt, value)


# ---------------------------------------------------------------------------
# The refinement operation
# ---------------------------------------------------------------------------


def refine(
    segment: SegmentRecord,
    plan: AttributeSet,
    rule_order: list[str] | None = None,
) -> SymbolicPrompt:
    """Adapt a retrieved segment toward the plan with registered rules.

    A caller-supplied rule order (for example one proposed by the external
    interpreter) is honored only if every name is registered; anything else
    falls back to the default order.
    """
    plan.checked()
    order = DEFAULT_RULE_ORDER
    if rule_order and all(name in RULES for name in rule_order):
        order = tuple(rule_order)

    prompt = segment.content
    applied: list[str] = []
    notes: list[str] = []

    for attr in plan.attributes:
        if attr.attr_class.value == "descriptive":
            notes.append(f"{attr.id}={attr.value}")

    already_shaped = "shape_velocity" in segment.content.provenance.applied_rules
    for name in order:
        rule = RULES[name]
        attr = plan.get(rule.applies_to)
        if attr is None:
            continue
        if name == "reroot_chords" and "chord_progression" not in segment.tags:
            notes.append("chord_progression:skipped(segment has no chord tag)")
            continue
        if name == "shape_velocity" and already_shaped:
            notes.append("shape_velocity:skipped(already shaped upstream)")
            continue
        before = prompt
        prompt = rule.transform(prompt, attr.value)
        if prompt != before:
            applied.append(name)

    return prompt.with_provenance(
        Provenance(
            segment_id=segment.segment_id,
            applied_rules=tuple(applied),
            notes=tuple(notes),
        )
    )
