"""Closed attribute vocabulary: ids, classes, value domains, default weights.

The vocabulary is loaded from ``schema/vocabulary.json``, which is also the
file the web UI reads to build its dropdowns, so the two sides can never
drift apart silently.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Any

VOCABULARY_RESOURCE = "vocabulary.json"


@lru_cache(maxsize=1)
def _vocab() -> dict[str, Any]:
    ref = resources.files("musicsketch.schema").joinpath(VOCABULARY_RESOURCE)
    return json.loads(ref.read_text(encoding="utf-8"))


def vocabulary_dict() -> dict[str, Any]:
    """The raw vocabulary document (as served to the UI)."""
    return _vocab()


def attribute_ids() -> tuple[str, ...]:
    return tuple(_vocab()["attributes"])


def is_known_attribute(attr_id: str) -> bool:
    return attr_id in _vocab()["attributes"]


def attribute_class(attr_id: str) -> str:
    return _vocab()["attributes"][attr_id]["class"]


def default_weight(attr_id: str) -> float:
    return float(_vocab()["classes"][attribute_class(attr_id)]["default_weight"])


def value_domain(attr_id: str) -> tuple[str, ...] | None:
    """Enumerated values for an attribute, or None for tempo (structured)."""
    spec = _vocab()["attributes"][attr_id]
    values = spec.get("values")
    return tuple(values) if values is not None else None


def bpm_range() -> tuple[int, int]:
    spec = _vocab()["attributes"]["tempo"]
    return int(spec["bpm_min"]), int(spec["bpm_max"])


def tempo_buckets() -> dict[str, tuple[int, int]]:
    spec = _vocab()["attributes"]["tempo"]
    return {name: (int(lo), int(hi)) for name, (lo, hi) in spec["buckets"].items()}


def bucket_for_bpm(bpm: int) -> str:
    for name, (lo, hi) in tempo_buckets().items():
        if lo <= bpm <= hi:
            return name
    raise ValueError(f"bpm {bpm} outside supported range {bpm_range()}")


def default_bpm_for_bucket(bucket: str) -> int:
    return int(_vocab()["attributes"]["tempo"]["bucket_default_bpm"][bucket])


def tempo_value(bpm: int | None = None, bucket: str | None = None) -> dict[str, Any]:
    """Build a canonical tempo value from a bpm, a bucket, or both."""
    if bpm is None:
        if bucket is None:
            raise ValueError("tempo needs a bpm or a bucket")
        bpm = default_bpm_for_bucket(bucket)
    return {"bpm": int(bpm), "bucket": bucket_for_bpm(int(bpm))}


def is_legal_value(attr_id: str, value: Any) -> bool:
    """True when value lies in the attribute's declared domain."""
    if not is_known_attribute(attr_id):
        return False
    if attr_id == "tempo":
        if not isinstance(value, dict) or set(value) != {"bpm", "bucket"}:
            return False
        bpm, bucket = value["bpm"], value["bucket"]
        lo, hi = bpm_range()
        if not (isinstance(bpm, int) and not isinstance(bpm, bool) and lo <= bpm <= hi):
            return False
        return bucket == bucket_for_bpm(bpm)
    domain = value_domain(attr_id)
    return isinstance(value, str) and domain is not None and value in domain


def canonical_value_key(attr_id: str, value: Any) -> str:
    """Stable string used for indexing and match comparison.

    Tempo collapses to its bucket: retrieval treats two tempos as equal when
    their buckets agree, never by exact bpm.
    """
    if attr_id == "tempo" and isinstance(value, dict):
        return str(value.get("bucket"))
    return json.dumps(value, sort_keys=True) if not isinstance(value, str) else value


def values_match(attr_id: str, a: Any, b: Any) -> bool:
    return canonical_value_key(attr_id, a) == canonical_value_key(attr_id, b)


def display_value(attr_id: str, value: Any) -> str:
    if attr_id == "tempo" and isinstance(value, dict):
        return f"{value['bpm']} bpm ({value['bucket']})"
    return str(value)
