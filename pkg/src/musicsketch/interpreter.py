"""Turn free-text creative intent into an explained attribute plan.

Two backends: a deterministic lexicon fallback that always works offline, and
an optional external LLM endpoint whose replies are schema-validated and never
trusted to produce an invalid plan. Every attribute the interpreter emits
carries a plain-language explanation (the guide role), and plan edits can be
turned into reflective questions (the coach role).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Callable

import httpx

from . import theory, vocabulary
from .model import Attribute, AttributeSet, ValidationError, make_attribute

DEFAULT_TIMEOUT_SECONDS = 15.0

# The paper-facing starter prompts shipped with the input panel.
STARTER_INTENTS = (
    "generate an exciting song",
    "happy song",
    "sad feeling in minor key, with slow tempo and soft piano",
    "A jazz ballad, melancholic, minor key, slow tempo, swing rhythm",
)


class EmptyIntent(Exception):
    """Input text is blank after trimming."""


class BackendUnavailable(Exception):
    """External backend unreachable or refused to serve."""


class MalformedBackendOutput(Exception):
    """External backend replied with something that fails validation."""


@dataclass(frozen=True)
class InterpreterBackend:
    """How to interpret: offline lexicon or an external LLM endpoint.

    The lexicon fallback needs no configuration and is always constructible.
    For tests, config may carry a "send" callable that replaces the HTTP
    transport: send(payload) -> (status_code, body_text).
    """

    kind: str = "lexicon_fallback"
    config: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("lexicon_fallback", "external_llm"):
            raise ValueError(f"unknown interpreter backend {self.kind!r}")
        if self.kind == "external_llm" and not (
            self.config.get("endpoint") or self.config.get("send")
        ):
            raise ValueError("external_llm backend needs an endpoint")


# ---------------------------------------------------------------------------
# Lexicon and template registry
# ---------------------------------------------------------------------------


def _load_json_resource(name: str) -> Any:
    ref = resources.files("musicsketch.data").joinpath(name)
    return json.loads(ref.read_text(encoding="utf-8"))


def stem(word: str) -> str:
    """Light suffix stripping so 'exciting' and 'excited' meet at 'excit'."""
    word = word.lower()
    for suffix in ("ing", "ed", "ly", "es", "s"):
        if word.endswith(suffix) and len(word) - len(suffix) >= 4:
            return word[: -len(suffix)]
    return word


@lru_cache(maxsize=1)
def load_lexicon() -> dict[str, list[tuple[str, Any]]]:
    """Keyword lexicon keyed by stemmed word, validated against the vocabulary."""
    raw = _load_json_resource("lexicon.json")["keywords"]
    lexicon: dict[str, list[tuple[str, Any]]] = {}
    for keyword, pairs in raw.items():
        entries: list[tuple[str, Any]] = []
        for attr_id, value in pairs:
            if attr_id == "tempo" and isinstance(value, dict):
                value = vocabulary.tempo_value(value.get("bpm"), value.get("bucket"))
            if not vocabulary.is_legal_value(attr_id, value):
                raise ValueError(f"lexicon entry {keyword!r}: illegal {attr_id}={value!r}")
            entries.append((attr_id, value))
        lexicon[stem(keyword)] = entries
    return lexicon


@lru_cache(maxsize=1)
def load_templates() -> dict[str, dict[str, str]]:
    templates = _load_json_resource("templates.json")
    _check_template_coverage(templates)
    return templates


def _check_template_coverage(templates: dict[str, dict[str, str]]) -> None:
    """Every vocabulary value must resolve to a template; fail fast otherwise."""
    for attr_id in vocabulary.attribute_ids():
        if attr_id == "tempo":
            missing = set(vocabulary.tempo_buckets()) - set(templates.get("tempo", {}))
            if missing:
                raise ValueError(f"tempo templates missing buckets {sorted(missing)}")
            continue
        table = templates.get(attr_id, {})
        for value in vocabulary.value_domain(attr_id) or ():
            if value in table:
                continue
            if attr_id == "key" and f"_{value.split()[1]}" in table:
                continue
            raise ValueError(f"no explanation template for {attr_id}={value!r}")


def explanation_for(attr_id: str, value: Any) -> str:
    """Guide-role text for an attribute value, from the template registry."""
    templates = load_templates()
    table = templates.get(attr_id, {})
    if attr_id == "tempo":
        bucket = value["bucket"] if isinstance(value, dict) else str(value)
        text = table[bucket]
        bpm = value.get("bpm", "") if isinstance(value, dict) else ""
        return text.replace("{bpm}", str(bpm))
    if isinstance(value, str) and value in table:
        return table[value].replace("{value}", value)
    if attr_id == "key" and isinstance(value, str):
        mode = value.split()[-1]
        return table[f"_{mode}"].replace("{value}", value)
    raise KeyError(f"no template for {attr_id}={value!r}")


def explain(attribute: Attribute) -> str:
    return explanation_for(attribute.id, attribute.value)


# ---------------------------------------------------------------------------
# Lexicon fallback interpretation
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[a-z#]+|\d+")

_MODE_WORDS = {"major": "major", "minor": "minor"}


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class _Assignment:
    value: Any
    explicit: bool
    overridden_from: Any = None


def _interpret_fallback(text: str) -> AttributeSet:
    tokens = _tokenize(text)
    lexicon = load_lexicon()
    picks: dict[str, _Assignment] = {}

    def assign(attr_id: str, value: Any, explicit: bool) -> None:
        current = picks.get(attr_id)
        if current is None:
            picks[attr_id] = _Assignment(value, explicit)
        elif explicit and not current.explicit and not vocabulary.values_match(attr_id, current.value, value):
            # An explicit mention (e.g. "minor key") beats a mood-implied
            # default; remember the implied value so we can ask about it.
            picks[attr_id] = _Assignment(value, True, overridden_from=current.value)

    skip_next = False
    for i, token in enumerate(tokens):
        if skip_next:
            skip_next = False
            continue
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        tonic = theory.normalize_tonic(token) if len(token) <= 2 else None
        if tonic and nxt and stem(nxt) in _MODE_WORDS:
            assign("key", f"{tonic} {_MODE_WORDS[stem(nxt)]}", explicit=True)
            skip_next = True
            continue
        if token.isdigit():
            bpm = int(token)
            lo, hi = vocabulary.bpm_range()
            if lo <= bpm <= hi:
                assign("tempo", vocabulary.tempo_value(bpm=bpm), explicit=True)
            continue
        entries = lexicon.get(stem(token))
        if entries:
            for rank, (attr_id, value) in enumerate(entries):
                assign(attr_id, value, explicit=(rank == 0))

    if "key" not in picks:
        picks["key"] = _Assignment("C major", explicit=False)
    if "tempo" not in picks:
        picks["tempo"] = _Assignment(vocabulary.tempo_value(bucket="medium"), explicit=False)

    attributes = []
    for attr_id, pick in picks.items():
        question = None
        if pick.overridden_from is not None:
            question = (
                f"You asked for {vocabulary.display_value(attr_id, pick.value)} even though the "
                f"mood suggested {vocabulary.display_value(attr_id, pick.overridden_from)}. "
                f"Does that color fit what you want to express?"
            )
        attributes.append(
            make_attribute(
                attr_id,
                pick.value,
                explanation=explanation_for(attr_id, pick.value),
                reflective_question=question,
            )
        )
    return AttributeSet(attributes=tuple(attributes), source_text=text).checked()


# ---------------------------------------------------------------------------
# External backend
# ---------------------------------------------------------------------------


def _default_send(backend: InterpreterBackend) -> Callable[[dict[str, Any]], tuple[int, str]]:
    endpoint = backend.config["endpoint"]
    timeout = float(backend.config.get("timeout", DEFAULT_TIMEOUT_SECONDS))
    headers = {}
    if backend.config.get("api_key"):
        headers["Authorization"] = f"Bearer {backend.config['api_key']}"

    def send(payload: dict[str, Any]) -> tuple[int, str]:
        response = httpx.post(endpoint, json=payload, headers=headers, timeout=timeout)
        return response.status_code, response.text

    return send


def _plan_from_reply(body: str, text: str) -> AttributeSet:
    """Build a validated plan from an external reply, or raise ValidationError."""
    data = json.loads(body)
    if not isinstance(data, dict) or not isinstance(data.get("attributes"), list):
        raise ValidationError(message="reply is not an attribute-set object")
    attributes: list[Attribute] = []
    seen: set[str] = set()
    for item in data["attributes"]:
        if not isinstance(item, dict) or "id" not in item or "value" not in item:
            raise ValidationError(message="attribute entries need id and value")
        attr_id = item["id"]
        if attr_id in seen:
            raise ValidationError(message=f"duplicate attribute {attr_id!r}")
        seen.add(attr_id)
        weight = item.get("weight")
        if weight is not None and not isinstance(weight, (int, float)):
            raise ValidationError(message="weight must be numeric")
        value = item["value"]
        if attr_id == "tempo" and isinstance(value, dict):
            try:
                value = vocabulary.tempo_value(value.get("bpm"), value.get("bucket"))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValidationError(message=f"bad tempo value: {exc}") from exc
        explanation = item.get("explanation") or ""
        if not isinstance(explanation, str):
            raise ValidationError(message="explanation must be a string")
        if not vocabulary.is_legal_value(attr_id, value):
            raise ValidationError(message=f"illegal value for {attr_id!r}")
        if not explanation:
            explanation = explanation_for(attr_id, value)
        attributes.append(
            make_attribute(attr_id, value, weight=None if weight is None else float(weight), explanation=explanation)
        )
    ids = {a.id for a in attributes}
    if "key" not in ids:
        attributes.append(make_attribute("key", "C major", explanation=explanation_for("key", "C major")))
    if "tempo" not in ids:
        tempo = vocabulary.tempo_value(bucket="medium")
        attributes.append(make_attribute("tempo", tempo, explanation=explanation_for("tempo", tempo)))
    return AttributeSet(attributes=tuple(attributes), source_text=text).checked()


def _interpret_external(text: str, backend: InterpreterBackend) -> AttributeSet:
    send = backend.config.get("send") or _default_send(backend)
    payload: dict[str, Any] = {
        "text": text,
        "response_schema": "attribute_set",
        "vocabulary": vocabulary.vocabulary_dict(),
    }
    last_error = "empty reply"
    for attempt in range(2):
        try:
            status, body = send(payload)
        except httpx.HTTPError as exc:
            raise BackendUnavailable(str(exc)) from exc
        if status != 200:
            raise BackendUnavailable(f"backend returned HTTP {status}")
        try:
            return _plan_from_reply(body, text)
        except (ValidationError, ValueError, TypeError, KeyError) as exc:
            last_error = str(exc)
            if attempt == 0:
                payload = dict(payload, repair=f"previous reply invalid: {last_error}")
    raise MalformedBackendOutput(last_error)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def interpret(text: str, backend: InterpreterBackend | None = None) -> AttributeSet:
    """Interpret intent text into a validated, explained attribute plan.

    Raises EmptyIntent on blank input. With an external backend, raises
    BackendUnavailable or MalformedBackendOutput so the caller can decide to
    fall back to the lexicon.
    """
    if not text or not text.strip():
        raise EmptyIntent("intent text is empty")
    if backend is None or backend.kind == "lexicon_fallback":
        return _interpret_fallback(text)
    return _interpret_external(text, backend)


def reflective_question(before: AttributeSet, after: AttributeSet) -> list[str]:
    """One coach-role question per attribute whose value changed."""
    questions: list[str] = []
    before_map = {a.id: a for a in before.attributes}
    after_map = {a.id: a for a in after.attributes}
    for attr_id, new_attr in after_map.items():
        old_attr = before_map.get(attr_id)
        if old_attr is None:
            questions.append(
                f"You added {attr_id} = {vocabulary.display_value(attr_id, new_attr.value)}. "
                f"What should it bring to the piece?"
            )
            continue
        if old_attr.value == new_attr.value:
            continue
        old_text = vocabulary.display_value(attr_id, old_attr.value)
        new_text = vocabulary.display_value(attr_id, new_attr.value)
        if attr_id == "tempo":
            direction = "slower" if new_attr.value["bpm"] < old_attr.value["bpm"] else "faster"
            questions.append(
                f"You changed the tempo from {old_text} to {new_text}. "
                f"Does the {direction} pace still convey the feeling you intended?"
            )
        else:
            questions.append(
                f"You changed {attr_id} from {old_text} to {new_text}. "
                f"How does that change what the music expresses?"
            )
    for attr_id, old_attr in before_map.items():
        if attr_id not in after_map:
            questions.append(
                f"You removed {attr_id} (was {vocabulary.display_value(attr_id, old_attr.value)}). "
                f"What do you want to leave open instead?"
            )
    return questions
