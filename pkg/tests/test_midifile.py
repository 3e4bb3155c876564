from __future__ import annotations

import random

import pytest

import oracles
from conftest import random_prompt
from musicsketch import midifile, theory
from musicsketch.model import NoteEvent, SymbolicPrompt


def simple_prompt(**overrides) -> SymbolicPrompt:
    kwargs = dict(
        tempo_bpm=120,
        key="C major",
        meter=(4, 4),
        bars=((NoteEvent(60, 0, 480, 96),),),
    )
    kwargs.update(overrides)
    return SymbolicPrompt(**kwargs)


class TestWrite:
    def test_single_note_round_trip(self):
        prompt = simple_prompt()
        back = midifile.read_prompt(midifile.write_midi(prompt))
        assert back.bars == prompt.bars
        assert (back.tempo_bpm, back.key, back.meter) == (120, "C major", (4, 4))

    def test_header_metadata_via_independent_reader(self):
        prompt = simple_prompt(tempo_bpm=84, key="F# minor", meter=(3, 4))
        meta = oracles.read_smf0(midifile.write_midi(prompt))
        assert meta["division"] == 480
        assert meta["timesig"] == (3, 4)
        assert round(60_000_000 / meta["mpqn"]) == 84
        assert meta["keysig"] == (3, 1)  # F# minor: three sharps, minor flag

    def test_four_bar_prompt_bar_count_and_tempo(self):
        bars = tuple(
            (NoteEvent(60 + i, 0, 480, 90),) if i < 3 else ()
            for i in range(4)
        )
        prompt = simple_prompt(bars=bars, tempo_bpm=132)
        back = midifile.read_prompt(midifile.write_midi(prompt))
        assert len(back.bars) == 4
        assert back.tempo_bpm == 132

    def test_tied_note_off_lands_on_bar_boundary(self):
        # Two tied events representing one note crossing the boundary.
        tpb = theory.ticks_per_bar((4, 4))
        bars = (
            (NoteEvent(64, 1440, 480, 90),),
            (NoteEvent(64, 0, 240, 90),),
        )
        prompt = simple_prompt(bars=bars)
        meta = oracles.read_smf0(midifile.write_midi(prompt))
        offs = [tick for tick, kind, payload in meta["events"] if kind == "off" and payload[0] == 64]
        assert offs == [tpb, tpb + 240]

    def test_notes_match_independent_reader(self):
        rng = random.Random(21)
        for _ in range(25):
            prompt = random_prompt(rng)
            meta = oracles.read_smf0(midifile.write_midi(prompt))
            notes = oracles.notes_from_events(meta["events"])
            tpb = prompt.ticks_per_bar
            expected = sorted(
                (b * tpb + n.position, n.pitch, n.length, n.velocity)
                for b, n in prompt.iter_notes()
            )
            assert notes == expected

    def test_byte_determinism(self):
        rng = random.Random(5)
        prompt = random_prompt(rng)
        assert midifile.write_midi(prompt) == midifile.write_midi(prompt)

    def test_all_supported_bpm_round_trip(self):
        for bpm in range(40, 241):
            assert midifile.mpqn_to_bpm(midifile.bpm_to_mpqn(bpm)) == bpm


class TestParseErrors:
    def test_empty_bytes(self):
        with pytest.raises(midifile.MidiParseError):
            midifile.parse_midi(b"")

    def test_bad_magic_reports_offset_zero(self):
        with pytest.raises(midifile.MidiParseError) as exc:
            midifile.parse_midi(b"RIFF" + b"\x00" * 20)
        assert exc.value.offset == 0

    def test_truncated_track(self):
        data = midifile.write_midi(simple_prompt())
        with pytest.raises(midifile.MidiParseError):
            midifile.parse_midi(data[:20])

    def test_smpte_division_rejected(self):
        header = b"MThd" + (6).to_bytes(4, "big") + (0).to_bytes(2, "big")
        header += (1).to_bytes(2, "big") + (0x8000 | 0x1E50).to_bytes(2, "big")
        with pytest.raises(midifile.MidiParseError):
            midifile.parse_midi(header)


class TestForeignFiles:
    def test_format1_multitrack_merged(self):
        # Hand-build a two-track format 1 file at 240 tpq.
        def track(events: bytes) -> bytes:
            return b"MTrk" + len(events).to_bytes(4, "big") + events

        t1 = bytes([0, 0xFF, 0x51, 0x03]) + (500000).to_bytes(3, "big")
        t1 += bytes([0, 0x90, 60, 100]) + bytes([0x81, 0x70, 0x80, 60, 0])  # 240 ticks
        t1 += bytes([0, 0xFF, 0x2F, 0x00])
        t2 = bytes([0, 0x90, 64, 90]) + bytes([0x83, 0x60, 0x80, 64, 0])  # 480 ticks
        t2 += bytes([0, 0xFF, 0x2F, 0x00])
        header = b"MThd" + (6).to_bytes(4, "big") + (1).to_bytes(2, "big")
        header += (2).to_bytes(2, "big") + (240).to_bytes(2, "big")
        parsed = midifile.parse_midi(header + track(t1) + track(t2))
        assert parsed.tempo_bpm == 120
        assert sorted(parsed.notes) == [(0, 60, 240, 100), (0, 64, 480, 90)]
        prompt = midifile.parsed_to_prompt(parsed, resolve_overlaps=True)
        # 240 tpq doubles to 480.
        assert [(n.pitch, n.length) for n in prompt.bars[0]] == [(60, 480), (64, 960)]

    def test_running_status_supported(self):
        events = bytes([0, 0xFF, 0x58, 0x04, 4, 2, 24, 8])
        events += bytes([0, 0x90, 60, 100, 0x60, 62, 100])  # running status note-on
        events += bytes([0x60, 0x80, 60, 0, 0x60, 62, 0])
        events += bytes([0, 0xFF, 0x2F, 0x00])
        header = b"MThd" + (6).to_bytes(4, "big") + (0).to_bytes(2, "big")
        header += (1).to_bytes(2, "big") + (480).to_bytes(2, "big")
        data = header + b"MTrk" + len(events).to_bytes(4, "big") + events
        parsed = midifile.parse_midi(data)
        assert [(t, p) for t, p, _, _ in parsed.notes] == [(0, 60), (96, 62)]

    def test_overlapping_same_pitch_resolved_as_retrigger(self):
        events = bytes([0, 0x90, 60, 100])
        events += bytes([0x78, 0x90, 60, 100])  # second onset 120 ticks later
        events += bytes([0x78, 0x80, 60, 0])
        events += bytes([0x78, 0x80, 60, 0])
        events += bytes([0, 0xFF, 0x2F, 0x00])
        header = b"MThd" + (6).to_bytes(4, "big") + (0).to_bytes(2, "big")
        header += (1).to_bytes(2, "big") + (480).to_bytes(2, "big")
        data = header + b"MTrk" + len(events).to_bytes(4, "big") + events
        parsed = midifile.parse_midi(data)
        assert parsed.notes == [(0, 60, 240, 100), (120, 60, 240, 100)]
        fixed = midifile.parsed_to_prompt(parsed, resolve_overlaps=True)
        assert [(n.position, n.length) for n in fixed.bars[0]] == [(0, 120), (120, 240)]
