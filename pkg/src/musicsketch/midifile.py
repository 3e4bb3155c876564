"""Standard MIDI file reading and writing.

Writing targets SMF format 0 at 480 ticks per quarter with tempo, key and
time signature meta events, which is exactly what the sketch preview and the
corpus on disk use. Reading accepts format 0 and format 1 files from anywhere,
merges their tracks, and re-quantizes to the fixed 480-tick resolution.

Event ordering on write is fully deterministic so identical prompts always
produce identical bytes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

from . import theory, vocabulary
from .model import TICKS_PER_QUARTER, NoteEvent, Provenance, SymbolicPrompt

_HEADER_CHUNK = b"MThd"
_TRACK_CHUNK = b"MTrk"

# Stable sort rank for simultaneous events.
_ORDER_TIMESIG = 0
_ORDER_KEYSIG = 1
_ORDER_TEMPO = 2
_ORDER_NOTE_OFF = 3
_ORDER_NOTE_ON = 4
_ORDER_EOT = 5


class MidiParseError(Exception):
    """Malformed MIDI input, with the byte offset where parsing gave up."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        suffix = f" (byte {offset})" if offset is not None else ""
        super().__init__(message + suffix)


@dataclass
class ParsedMidi:
    """Flat, track-merged view of a MIDI file before bar splitting."""

    ticks_per_quarter: int
    tempo_bpm: int = 120
    key: str | None = None
    meter: tuple[int, int] = (4, 4)
    notes: list[tuple[int, int, int, int]] = field(default_factory=list)  # tick, pitch, length, velocity
    end_tick: int = 0


def encode_vlq(value: int) -> bytes:
    """Variable-length quantity used for delta times."""
    if value < 0:
        raise ValueError("negative delta time")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def bpm_to_mpqn(bpm: int) -> int:
    return round(60_000_000 / bpm)


def mpqn_to_bpm(mpqn: int) -> int:
    return round(60_000_000 / mpqn)


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------


def write_midi(prompt: SymbolicPrompt) -> bytes:
    """Serialize a prompt as a format-0 SMF byte string."""
    tpb = prompt.ticks_per_bar
    events: list[tuple[int, int, bytes]] = []

    numerator, denominator = prompt.meter
    dd = int(math.log2(denominator))
    events.append((0, _ORDER_TIMESIG, bytes([0xFF, 0x58, 0x04, numerator, dd, 24, 8])))
    sf, mi = theory.key_signature_bytes(prompt.key)
    events.append((0, _ORDER_KEYSIG, bytes([0xFF, 0x59, 0x02, sf & 0xFF, mi])))
    events.append(
        (0, _ORDER_TEMPO, bytes([0xFF, 0x51, 0x03]) + bpm_to_mpqn(prompt.tempo_bpm).to_bytes(3, "big"))
    )

    for bar_index, note in prompt.iter_notes():
        start = bar_index * tpb + note.position
        events.append((start, _ORDER_NOTE_ON, bytes([0x90, note.pitch, note.velocity])))
        events.append((start + note.length, _ORDER_NOTE_OFF, bytes([0x80, note.pitch, 0])))

    end_tick = len(prompt.bars) * tpb
    events.append((end_tick, _ORDER_EOT, bytes([0xFF, 0x2F, 0x00])))
    events.sort(key=lambda e: (e[0], e[1], e[2]))

    body = bytearray()
    cursor = 0
    for tick, _, payload in events:
        body += encode_vlq(tick - cursor)
        body += payload
        cursor = tick

    header = _HEADER_CHUNK + struct.pack(">IHHH", 6, 0, 1, TICKS_PER_QUARTER)
    track = _TRACK_CHUNK + struct.pack(">I", len(body)) + bytes(body)
    return header + track


# ---------------------------------------------------------------------------
# Reading
# ---------------------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def need(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise MidiParseError(f"truncated while reading {what}", self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def read_vlq(self) -> int:
        value = 0
        for _ in range(4):
            byte = self.need(1, "delta time")[0]
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise MidiParseError("variable-length quantity too long", self.pos)


def parse_midi(data: bytes) -> ParsedMidi:
    """Parse an SMF format 0 or 1 byte string into a track-merged view.

    The first tempo, key signature, and time signature found win; note on/off
    pairs are matched first-in-first-out per (channel, pitch).
    """
    reader = _Reader(data)
    if reader.need(4, "header chunk id") != _HEADER_CHUNK:
        raise MidiParseError("not a standard MIDI file (missing MThd)", 0)
    header_len = struct.unpack(">I", reader.need(4, "header length"))[0]
    if header_len < 6:
        raise MidiParseError(f"header too short ({header_len})", reader.pos)
    fmt, ntrks, division = struct.unpack(">HHH", reader.need(6, "header fields"))
    reader.need(header_len - 6, "header padding")
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division not supported", 12)
    if division == 0:
        raise MidiParseError("zero time division", 12)

    parsed = ParsedMidi(ticks_per_quarter=division)
    tempo_seen = key_seen = meter_seen = False

    for _ in range(ntrks):
        if reader.pos >= len(reader.data):
            break
        if reader.need(4, "track chunk id") != _TRACK_CHUNK:
            raise MidiParseError("expected MTrk chunk", reader.pos - 4)
        track_len = struct.unpack(">I", reader.need(4, "track length"))[0]
        track_end = reader.pos + track_len
        if track_end > len(reader.data):
            raise MidiParseError("track length past end of file", reader.pos - 4)

        tick = 0
        status = 0
        open_notes: dict[tuple[int, int], list[tuple[int, int]]] = {}
        while reader.pos < track_end:
            tick += reader.read_vlq()
            byte = reader.need(1, "event status")[0]
            if byte & 0x80:
                status = byte
            else:
                if status == 0:
                    raise MidiParseError("data byte without running status", reader.pos - 1)
                reader.pos -= 1

            kind = status & 0xF0
            channel = status & 0x0F
            if status == 0xFF:
                meta_type = reader.need(1, "meta type")[0]
                length = reader.read_vlq()
                payload = reader.need(length, "meta payload")
                if meta_type == 0x51 and length == 3 and not tempo_seen:
                    parsed.tempo_bpm = mpqn_to_bpm(int.from_bytes(payload, "big"))
                    tempo_seen = True
                elif meta_type == 0x58 and length >= 2 and not meter_seen:
                    parsed.meter = (payload[0], 2 ** payload[1])
                    meter_seen = True
                elif meta_type == 0x59 and length == 2 and not key_seen:
                    sf = payload[0] - 256 if payload[0] > 127 else payload[0]
                    parsed.key = theory.key_from_signature(sf, payload[1])
                    key_seen = True
                elif meta_type == 0x2F:
                    parsed.end_tick = max(parsed.end_tick, tick)
                status = 0  # meta events cancel running status
            elif status in (0xF0, 0xF7):
                length = reader.read_vlq()
                reader.need(length, "sysex payload")
                status = 0
            elif kind in (0x80, 0x90):
                pitch = reader.need(1, "note pitch")[0]
                velocity = reader.need(1, "note velocity")[0]
                if pitch > 127 or velocity > 127:
                    raise MidiParseError("data byte out of range", reader.pos - 1)
                key_id = (channel, pitch)
                if kind == 0x90 and velocity > 0:
                    open_notes.setdefault(key_id, []).append((tick, velocity))
                else:
                    pending = open_notes.get(key_id)
                    if pending:
                        start, vel = pending.pop(0)
                        if tick > start:
                            parsed.notes.append((start, pitch, tick - start, vel))
            elif kind in (0xA0, 0xB0, 0xE0):
                reader.need(2, "channel event data")
            elif kind in (0xC0, 0xD0):
                reader.need(1, "channel event data")
            else:
                raise MidiParseError(f"unexpected status byte 0x{status:02x}", reader.pos - 1)
        reader.pos = track_end

    parsed.notes.sort(key=lambda n: (n[0], n[1]))
    if parsed.notes:
        last_off = max(t + length for t, _, length, _ in parsed.notes)
        parsed.end_tick = max(parsed.end_tick, last_off)
    return parsed


# ---------------------------------------------------------------------------
# Conversion to bar-indexed prompts
# ---------------------------------------------------------------------------


def split_into_bars(
    notes: list[tuple[int, int, int, int]],
    ticks_per_bar: int,
    bar_count: int,
    resolve_overlaps: bool = False,
) -> tuple[tuple[NoteEvent, ...], ...]:
    """Place absolute-tick notes into bars, splitting ties at boundaries.

    With resolve_overlaps, a note that would overlap an earlier same-pitch
    note inside a bar is treated as a retrigger: the earlier note is trimmed
    to end where the new one starts. Foreign files need this; our own output
    never does.
    """
    bars: list[list[NoteEvent]] = [[] for _ in range(bar_count)]
    for tick, pitch, length, velocity in notes:
        remaining = length
        cursor = tick
        while remaining > 0:
            bar_index = cursor // ticks_per_bar
            if bar_index >= bar_count:
                break
            position = cursor - bar_index * ticks_per_bar
            span = min(remaining, ticks_per_bar - position)
            piece: NoteEvent | None = NoteEvent(
                pitch=pitch, position=position, length=span, velocity=velocity
            )
            if resolve_overlaps:
                # Notes arrive in onset order, so an overlapping earlier note
                # either shares the onset (drop the newcomer) or gets trimmed.
                bar = bars[bar_index]
                for i, existing in enumerate(bar):
                    if existing.pitch != pitch or not (
                        existing.position < piece.end and position < existing.end
                    ):
                        continue
                    if existing.position == position:
                        piece = None
                    else:
                        bar[i] = NoteEvent(
                            pitch,
                            existing.position,
                            position - existing.position,
                            existing.velocity,
                        )
                    break
            if piece is not None:
                bars[bar_index].append(piece)
            cursor += span
            remaining -= span
    return tuple(tuple(sorted(bar, key=lambda n: (n.position, n.pitch))) for bar in bars)


def parsed_to_prompt(
    parsed: ParsedMidi,
    fallback_key: str = "C major",
    provenance: Provenance | None = None,
    resolve_overlaps: bool = False,
) -> SymbolicPrompt:
    """Re-quantize a parsed file to 480 tpq and build a SymbolicPrompt."""
    scale = TICKS_PER_QUARTER / parsed.ticks_per_quarter
    quantized: list[tuple[int, int, int, int]] = []
    for tick, pitch, length, velocity in parsed.notes:
        start = round(tick * scale)
        span = max(1, round(length * scale))
        quantized.append((start, pitch, span, max(1, min(127, velocity))))

    meter = parsed.meter
    if theory.meter_name(meter) not in (vocabulary.value_domain("meter") or ()):
        meter = (4, 4)
    tpb = theory.ticks_per_bar(meter)

    end_tick = max(round(parsed.end_tick * scale), max((t + l for t, _, l, _ in quantized), default=0))
    bar_count = max(1, math.ceil(end_tick / tpb)) if end_tick else 1

    lo, hi = vocabulary.bpm_range()
    return SymbolicPrompt(
        tempo_bpm=min(hi, max(lo, parsed.tempo_bpm)),
        key=parsed.key or fallback_key,
        meter=meter,
        bars=split_into_bars(quantized, tpb, bar_count, resolve_overlaps=resolve_overlaps),
        provenance=provenance or Provenance(),
    )


def read_prompt(data: bytes, provenance: Provenance | None = None) -> SymbolicPrompt:
    """Parse bytes produced by :func:`write_midi` back into a prompt."""
    return parsed_to_prompt(parse_midi(data), provenance=provenance)
