"""Deterministic demo corpus: twenty tonal segments for offline deployments.

Each segment is built from scale material (a melody register two octaves
above diatonic block chords, so the registers can never collide), emitted as
MIDI, and ingested through the normal path so tags, ids, and the on-disk
layout are exactly what real ingestion produces.
"""

from __future__ import annotations

from typing import Any

from . import refiner, theory, vocabulary
from .midifile import write_midi
from .model import NoteEvent, SegmentRecord, SymbolicPrompt
from .store import SegmentDatabase

# Melody degree patterns, one bar each (degree, eighth-slot, length-in-eighths).
_PATTERNS: dict[str, list[tuple[int, int, int]]] = {
    "run": [(0, 0, 1), (1, 1, 1), (2, 2, 1), (3, 3, 1), (4, 4, 1), (5, 5, 1), (6, 6, 1), (7, 7, 1)],
    "arpeggio": [(0, 0, 2), (2, 2, 2), (4, 4, 2), (7, 6, 2)],
    "zigzag": [(0, 0, 1), (2, 1, 1), (1, 2, 1), (3, 3, 1), (2, 4, 1), (4, 5, 1), (3, 6, 1), (5, 7, 1)],
    "hold": [(0, 0, 4), (4, 4, 4)],
    "wave": [(4, 0, 2), (2, 2, 1), (0, 3, 1), (1, 4, 2), (3, 6, 2)],
}


def _degree_pitch(base: int, semis: tuple[int, ...], degree: int) -> int:
    octave, step = divmod(degree, 7)
    return base + semis[step] + 12 * octave


def build_segment_prompt(
    key: str,
    tempo_bpm: int,
    pattern: str = "run",
    progression: str | None = "I-IV-V-I",
    bars: int = 4,
    swing: bool = False,
    velocity: int = 96,
) -> SymbolicPrompt:
    """Compose a small tonal sketch in the given key."""
    tonic_pc, mode = theory.parse_key(key)
    tonic_semis = theory.MAJOR_SCALE if mode == "major" else theory.MINOR_SCALE
    # Chords top out 23 semitones above their base, so a melody register one
    # semitone higher can never share a pitch with them.
    chord_base = 36 + tonic_pc
    melody_base = chord_base + 24
    meter = (4, 4)
    tpb = theory.ticks_per_bar(meter)
    eighth = 240

    bar_list = []
    progression_steps = progression.split("-") if progression else []
    for b in range(bars):
        notes: list[NoteEvent] = []
        shape = _PATTERNS[pattern]
        for degree, slot, spans in shape:
            notes.append(
                NoteEvent(
                    pitch=_degree_pitch(melody_base, tonic_semis, degree),
                    position=slot * eighth,
                    length=spans * eighth,
                    velocity=velocity,
                )
            )
        if progression:
            degree = theory.numeral_degree(progression_steps[b % len(progression_steps)])
            for stack in range(3):
                step = degree + 2 * stack
                octave, idx = divmod(step, 7)
                pitch = chord_base + tonic_semis[idx] + 12 * octave
                notes.append(
                    NoteEvent(pitch=pitch, position=0, length=tpb, velocity=max(1, velocity - 20))
                )
        bar_list.append(tuple(sorted(notes, key=lambda n: (n.position, n.pitch))))

    prompt = SymbolicPrompt(
        tempo_bpm=tempo_bpm,
        key=key,
        meter=meter,
        bars=tuple(bar_list),
    )
    if swing:
        prompt = refiner.apply_swing(prompt, "swing")
    return prompt


# (key, bpm, pattern, progression, swing, mood, genre, timbre)
_SEED_SPECS: list[tuple[str, int, str, str | None, bool, str, str, str]] = [
    ("C major", 132, "run", "I-IV-V-I", False, "excited", "pop", "piano"),
    ("C major", 126, "zigzag", "I-V-vi-IV", False, "happy", "pop", "synth"),
    ("G major", 120, "arpeggio", "I-vi-IV-V", False, "happy", "folk", "guitar"),
    ("D major", 140, "run", "I-IV-V-I", False, "excited", "rock", "guitar"),
    ("F major", 100, "wave", "I-V-vi-IV", False, "hopeful", "pop", "piano"),
    ("A major", 96, "arpeggio", "ii-V-I", False, "calm", "classical", "strings"),
    ("E major", 112, "zigzag", "I-vi-IV-V", False, "happy", "electronic", "synth"),
    ("A# major", 84, "hold", "I-IV-V-I", False, "calm", "ambient", "organ"),
    ("C major", 72, "hold", "ii-V-I", True, "melancholic", "jazz", "piano"),
    ("G major", 104, "wave", "ii-V-I", True, "hopeful", "jazz", "brass"),
    ("A minor", 72, "wave", "i-iv-v-i", False, "sad", "classical", "piano"),
    ("A minor", 66, "hold", "i-VI-III-VII", False, "sad", "ambient", "strings"),
    ("A minor", 80, "arpeggio", "i-iv-v-i", True, "melancholic", "jazz", "piano"),
    ("E minor", 88, "zigzag", "i-VI-III-VII", False, "mysterious", "folk", "guitar"),
    ("E minor", 132, "run", "i-iv-v-i", False, "tense", "rock", "guitar"),
    ("D minor", 76, "wave", "i-iv-v-i", False, "melancholic", "blues", "organ"),
    ("B minor", 100, "arpeggio", "i-VI-III-VII", False, "mysterious", "electronic", "synth"),
    ("C minor", 70, "hold", "i-iv-v-i", False, "sad", "classical", "violin"),
    ("F# minor", 94, "zigzag", "i-VI-III-VII", False, "tense", "electronic", "synth"),
    ("D major", 60, "hold", "I-IV-V-I", False, "calm", "classical", "flute"),
]


def seed_corpus(db: SegmentDatabase, count: int = 20) -> list[SegmentRecord]:
    """Ingest the demo segments (at most twenty) into a database."""
    records = []
    for key, bpm, pattern, progression, swing, mood, genre, timbre in _SEED_SPECS[:count]:
        prompt = build_segment_prompt(key, bpm, pattern, progression, swing=swing)
        tags: dict[str, Any] = {
            "key": key,
            "tempo": vocabulary.tempo_value(bpm=bpm),
            "meter": "4/4",
            "mood": mood,
            "genre": genre,
            "timbre": timbre,
            "rhythm_pattern": refiner.detect_rhythm(prompt),
            "density": refiner.detect_density(prompt),
        }
        if progression:
            tags["chord_progression"] = progression
        records.append(db.ingest(write_midi(prompt), tags))
    return records
