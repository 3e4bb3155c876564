"""Independent oracle implementations the tests check the real code against.

Everything here is deliberately written from first principles (plain loops,
hand-rolled statistics, an independent byte-level MIDI reader) so a bug in
the package cannot hide behind shared code.
"""

from __future__ import annotations

import math
import struct


def tempo_bucket(bpm: int) -> str:
    if bpm <= 89:
        return "slow"
    if bpm <= 119:
        return "medium"
    return "fast"


def values_equal(attr_id: str, a, b) -> bool:
    if attr_id == "tempo":
        return tempo_bucket(a["bpm"]) == tempo_bucket(b["bpm"])
    return a == b


def score_oracle(plan, record) -> float:
    """Weighted indicator sum computed by a direct scan of the plan."""
    total = 0.0
    for attr in plan.attributes:
        if attr.id in record.tags and values_equal(attr.id, record.tags[attr.id], attr.value):
            total += attr.weight
    return total


def retrieve_oracle(plan, records) -> str:
    """Naive argmax over all records, ties to the smallest segment id."""
    best_id = None
    best_score = -1.0
    for record in sorted(records, key=lambda r: r.segment_id):
        value = score_oracle(plan, record)
        if value > best_score:
            best_id, best_score = record.segment_id, value
    assert best_id is not None
    return best_id


def pearson(x: list[float], y: list[float]) -> float:
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    dx = math.sqrt(sum((a - mx) ** 2 for a in x))
    dy = math.sqrt(sum((b - my) ** 2 for b in y))
    if dx == 0 or dy == 0:
        return 0.0
    return num / (dx * dy)


MAJOR_PROFILE = [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88]
MINOR_PROFILE = [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17]


def key_oracle(prompt) -> tuple[int, str]:
    """Duration-weighted histogram correlated against rotated profiles."""
    hist = [0.0] * 12
    for _, note in prompt.iter_notes():
        hist[note.pitch % 12] += note.length
    best = (0, "major")
    best_r = -2.0
    for pc in range(12):
        rotated = hist[pc:] + hist[:pc]
        for mode, profile in (("major", MAJOR_PROFILE), ("minor", MINOR_PROFILE)):
            r = pearson(rotated, profile)
            if r > best_r:
                best_r = r
                best = (pc, mode)
    return best


def velocity_oracle(velocity: int, factor: float) -> int:
    return max(1, min(127, math.floor(velocity * factor + 0.5)))


# ---------------------------------------------------------------------------
# Independent MIDI reader (format 0, explicit status bytes, as the writer emits)
# ---------------------------------------------------------------------------


def read_smf0(data: bytes) -> dict:
    """Minimal independent SMF reader returning raw event tuples."""
    assert data[:4] == b"MThd"
    length, fmt, ntrks, division = struct.unpack(">IHHH", data[4:14])
    assert length == 6 and fmt == 0 and ntrks == 1
    pos = 14
    assert data[pos : pos + 4] == b"MTrk"
    track_len = struct.unpack(">I", data[pos + 4 : pos + 8])[0]
    pos += 8
    end = pos + track_len

    def vlq(p: int) -> tuple[int, int]:
        value = 0
        while True:
            byte = data[p]
            p += 1
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value, p

    tick = 0
    events: list[tuple[int, str, tuple]] = []
    meta: dict = {"division": division}
    while pos < end:
        delta, pos = vlq(pos)
        tick += delta
        status = data[pos]
        pos += 1
        if status == 0xFF:
            mtype = data[pos]
            pos += 1
            mlen, pos = vlq(pos)
            payload = data[pos : pos + mlen]
            pos += mlen
            if mtype == 0x51:
                meta["mpqn"] = int.from_bytes(payload, "big")
            elif mtype == 0x58:
                meta["timesig"] = (payload[0], 2 ** payload[1])
            elif mtype == 0x59:
                sf = payload[0] - 256 if payload[0] > 127 else payload[0]
                meta["keysig"] = (sf, payload[1])
            elif mtype == 0x2F:
                meta["end_tick"] = tick
            events.append((tick, "meta", (mtype,)))
        elif status & 0xF0 == 0x90:
            events.append((tick, "on", (data[pos], data[pos + 1])))
            pos += 2
        elif status & 0xF0 == 0x80:
            events.append((tick, "off", (data[pos], data[pos + 1])))
            pos += 2
        else:
            raise AssertionError(f"unexpected status 0x{status:02x}")
    meta["events"] = events
    return meta


def notes_from_events(events) -> list[tuple[int, int, int, int]]:
    """(start, pitch, length, velocity) pairs matched first-in-first-out."""
    open_notes: dict[int, list[tuple[int, int]]] = {}
    out = []
    for tick, kind, payload in events:
        if kind == "on":
            pitch, velocity = payload
            open_notes.setdefault(pitch, []).append((tick, velocity))
        elif kind == "off":
            pitch, _ = payload
            start, velocity = open_notes[pitch].pop(0)
            out.append((start, pitch, tick - start, velocity))
    out.sort()
    return out
