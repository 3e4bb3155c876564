from __future__ import annotations

import random

import pytest

from musicsketch import seed, store, theory, vocabulary
from musicsketch.model import (
    AttributeSet,
    NoteEvent,
    SegmentRecord,
    SymbolicPrompt,
    make_attribute,
)

METER_CHOICES = [(4, 4), (3, 4), (2, 4), (6, 8)]


def random_bar(rng: random.Random, ticks_per_bar: int, max_notes: int = 8) -> tuple[NoteEvent, ...]:
    """A random bar with no same-pitch overlap (the representable subset)."""
    notes = []
    used: dict[int, list[tuple[int, int]]] = {}
    for _ in range(rng.randint(0, max_notes)):
        pitch = rng.randint(0, 127)
        position = rng.randrange(0, ticks_per_bar)
        length = rng.randint(1, ticks_per_bar - position)
        spans = used.setdefault(pitch, [])
        if any(position < e and s < position + length for s, e in spans):
            continue
        spans.append((position, position + length))
        notes.append(NoteEvent(pitch, position, length, rng.randint(1, 127)))
    return tuple(sorted(notes, key=lambda n: (n.position, n.pitch)))


def random_prompt(rng: random.Random, max_bars: int = 5) -> SymbolicPrompt:
    meter = rng.choice(METER_CHOICES)
    tpb = theory.ticks_per_bar(meter)
    bar_count = rng.randint(1, max_bars)
    return SymbolicPrompt(
        tempo_bpm=rng.randint(40, 240),
        key=rng.choice(theory.ALL_KEYS),
        meter=meter,
        bars=tuple(random_bar(rng, tpb) for _ in range(bar_count)),
    )


def random_value(rng: random.Random, attr_id: str):
    if attr_id == "tempo":
        return vocabulary.tempo_value(bpm=rng.randint(40, 240))
    return rng.choice(vocabulary.value_domain(attr_id))


def random_plan(rng: random.Random) -> AttributeSet:
    ids = list(vocabulary.attribute_ids())
    chosen = [i for i in ids if rng.random() < 0.6]
    if not any(vocabulary.attribute_class(i) == "global" for i in chosen):
        chosen.append(rng.choice(["key", "tempo", "meter"]))
    rng.shuffle(chosen)
    attrs = tuple(
        make_attribute(i, random_value(rng, i), weight=round(rng.random(), 3), explanation="x")
        for i in chosen
    )
    return AttributeSet(attributes=attrs, source_text="random plan")


_SHARED_CONTENT = SymbolicPrompt(
    tempo_bpm=100,
    key="C major",
    meter=(4, 4),
    bars=((NoteEvent(60, 0, 480, 90),),),
)


def random_record(rng: random.Random, index: int) -> SegmentRecord:
    tags = {}
    for attr_id in vocabulary.attribute_ids():
        if rng.random() < 0.5:
            tags[attr_id] = random_value(rng, attr_id)
    return SegmentRecord(segment_id=f"seg-{index:03d}", content=_SHARED_CONTENT, tags=tags)


@pytest.fixture(scope="session")
def seeded_db() -> store.SegmentDatabase:
    db = store.SegmentDatabase()
    seed.seed_corpus(db)
    return db


@pytest.fixture()
def corpus_dir(tmp_path):
    db = store.SegmentDatabase.open(tmp_path / "corpus")
    seed.seed_corpus(db)
    return tmp_path / "corpus"
