"""Pitch, key, scale, and bar arithmetic shared across the pipeline."""

from __future__ import annotations

TONIC_NAMES = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"]
MODES = ("major", "minor")

# Enharmonic spellings accepted on input; sharp names are canonical.
_TONIC_ALIASES = {
    "db": "C#", "eb": "D#", "gb": "F#", "ab": "G#", "bb": "A#",
}

MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)
MINOR_SCALE = (0, 2, 3, 5, 7, 8, 10)  # natural minor

# Scale degrees whose pitch class differs between parallel major and minor:
# degrees 3, 6, 7 (0-indexed 2, 5, 6).
MODE_SHIFT_DEGREES = (2, 5, 6)

ALL_KEYS = tuple(f"{t} {m}" for m in MODES for t in TONIC_NAMES)

# Circle-of-fifths accidental count for MIDI key-signature meta events,
# keyed by canonical (sharp-named) tonic.
KEY_SIG_SF_MAJOR = {
    "C": 0, "G": 1, "D": 2, "A": 3, "E": 4, "B": 5, "F#": 6, "C#": 7,
    "F": -1, "A#": -2, "D#": -3, "G#": -4,
}
KEY_SIG_SF_MINOR = {
    "A": 0, "E": 1, "B": 2, "F#": 3, "C#": 4, "G#": 5, "D#": 6, "A#": 7,
    "D": -1, "G": -2, "C": -3, "F": -4,
}
_SF_TO_TONIC_MAJOR = {sf: t for t, sf in KEY_SIG_SF_MAJOR.items()}
_SF_TO_TONIC_MINOR = {sf: t for t, sf in KEY_SIG_SF_MINOR.items()}


def normalize_tonic(name: str) -> str | None:
    """Map a tonic spelling ('c', 'Db', 'f#') to its canonical sharp name."""
    low = name.strip().lower()
    if low in _TONIC_ALIASES:
        return _TONIC_ALIASES[low]
    cand = low.capitalize() if len(low) == 1 else low[0].upper() + low[1:]
    return cand if cand in TONIC_NAMES else None


def parse_key(key: str) -> tuple[int, str]:
    """Split a key string like 'C major' into (tonic pitch class, mode)."""
    parts = key.split()
    if len(parts) != 2:
        raise ValueError(f"malformed key: {key!r}")
    tonic = normalize_tonic(parts[0])
    mode = parts[1].lower()
    if tonic is None or mode not in MODES:
        raise ValueError(f"unknown key: {key!r}")
    return TONIC_NAMES.index(tonic), mode


def key_name(tonic_pc: int, mode: str) -> str:
    return f"{TONIC_NAMES[tonic_pc % 12]} {mode}"


def scale_pcs(tonic_pc: int, mode: str) -> tuple[int, ...]:
    """Absolute pitch classes of the major or natural-minor scale."""
    steps = MAJOR_SCALE if mode == "major" else MINOR_SCALE
    return tuple((tonic_pc + s) % 12 for s in steps)


def minimal_interval(from_pc: int, to_pc: int) -> int:
    """Smallest signed semitone shift taking from_pc to to_pc; ties go up."""
    x = (to_pc - from_pc) % 12
    return x if x <= 6 else x - 12


def key_signature_bytes(key: str) -> tuple[int, int]:
    """(sf, mi) pair for an SMF key-signature meta event."""
    tonic_pc, mode = parse_key(key)
    tonic = TONIC_NAMES[tonic_pc]
    if mode == "major":
        return KEY_SIG_SF_MAJOR[tonic], 0
    return KEY_SIG_SF_MINOR[tonic], 1


def key_from_signature(sf: int, mi: int) -> str | None:
    table = _SF_TO_TONIC_MINOR if mi == 1 else _SF_TO_TONIC_MAJOR
    tonic = table.get(sf)
    if tonic is None:
        return None
    return f"{tonic} {'minor' if mi == 1 else 'major'}"


def parse_meter(meter: str) -> tuple[int, int]:
    num, _, den = meter.partition("/")
    return int(num), int(den)


def meter_name(meter: tuple[int, int]) -> str:
    return f"{meter[0]}/{meter[1]}"


def ticks_per_bar(meter: tuple[int, int], ticks_per_quarter: int = 480) -> int:
    numerator, denominator = meter
    return ticks_per_quarter * 4 * numerator // denominator


# Roman numerals map to diatonic degrees; case carries no extra meaning here
# because chord quality is taken from the prevailing scale.
_NUMERAL_DEGREES = {"i": 0, "ii": 1, "iii": 2, "iv": 3, "v": 4, "vi": 5, "vii": 6}


def numeral_degree(numeral: str) -> int:
    base = numeral.lower().rstrip("°o7")
    if base not in _NUMERAL_DEGREES:
        raise ValueError(f"unknown roman numeral: {numeral!r}")
    return _NUMERAL_DEGREES[base]


def progression_root_pcs(progression: str, key: str) -> list[int]:
    """Pitch class of each chord root in a progression like 'I-IV-V-I'."""
    tonic_pc, mode = parse_key(key)
    scale = scale_pcs(tonic_pc, mode)
    return [scale[numeral_degree(n)] for n in progression.split("-")]
