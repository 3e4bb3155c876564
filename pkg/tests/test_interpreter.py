from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from musicsketch import interpreter, vocabulary
from musicsketch.interpreter import (
    BackendUnavailable,
    EmptyIntent,
    InterpreterBackend,
    MalformedBackendOutput,
    explain,
    explanation_for,
    interpret,
    reflective_question,
)
from musicsketch.model import AttributeSet, make_attribute, validate_attribute_set


def values(plan: AttributeSet) -> dict:
    return {a.id: a.value for a in plan.attributes}


class TestLexiconFallback:
    def test_exciting_song(self):
        plan = interpret("generate an exciting song")
        got = values(plan)
        assert got["mood"] == "excited"
        assert got["tempo"]["bucket"] == "fast"
        assert got["key"].endswith("major")
        assert validate_attribute_set(plan) == []
        assert all(a.explanation for a in plan.attributes)
        assert plan.source_text == "generate an exciting song"

    def test_sad_minor_slow_piano(self):
        got = values(interpret("sad feeling in minor key, with slow tempo and soft piano"))
        assert got["mood"] == "sad"
        assert got["key"].endswith("minor")
        assert got["tempo"]["bucket"] == "slow"
        assert got["timbre"] == "piano"

    def test_jazz_ballad(self):
        got = values(interpret("A jazz ballad, melancholic, minor key, slow tempo, swing rhythm"))
        assert got["genre"] == "jazz"
        assert got["mood"] == "melancholic"
        assert got["key"].endswith("minor")
        assert got["tempo"]["bucket"] == "slow"
        assert got["rhythm_pattern"] == "swing"

    def test_empty_intent_raises(self):
        with pytest.raises(EmptyIntent):
            interpret("")
        with pytest.raises(EmptyIntent):
            interpret("   \n\t ")

    def test_defaults_when_nothing_matches(self):
        got = values(interpret("zzz qqq unrecognizable"))
        assert got["key"] == "C major"
        assert got["tempo"] == {"bpm": 100, "bucket": "medium"}

    def test_explicit_key_overrides_mood_implied(self):
        plan = interpret("happy song in a minor key")
        assert values(plan)["key"] == "A minor"
        key_attr = plan.get("key")
        assert key_attr is not None and key_attr.reflective_question

    def test_explicit_tonic_and_bpm(self):
        got = values(interpret("folk tune in D major at 96"))
        assert got["key"] == "D major"
        assert got["tempo"] == {"bpm": 96, "bucket": "medium"}

    def test_determinism(self):
        text = "A jazz ballad, melancholic, minor key, slow tempo, swing rhythm"
        assert interpret(text) == interpret(text)

    @settings(max_examples=150, deadline=None)
    @given(st.text(min_size=1))
    def test_totality_any_nonblank_text(self, text):
        try:
            plan = interpret(text)
        except EmptyIntent:
            assert not text.strip()
            return
        assert validate_attribute_set(plan) == []
        ids = plan.ids()
        assert "key" in ids and "tempo" in ids
        assert all(a.explanation for a in plan.attributes)


class TestExplain:
    def test_c_major_mentions_bright(self):
        text = explanation_for("key", "C major")
        assert "bright" in text.lower()
        assert "C major" in text

    def test_slow_tempo_template(self):
        text = explanation_for("tempo", {"bpm": 60, "bucket": "slow"})
        assert "60" in text and "slow" in text.lower()

    def test_staccato_links_liveliness(self):
        text = explanation_for("rhythm_pattern", "staccato")
        assert "staccato" in text.lower()
        assert "liveliness" in text.lower() or "lively" in text.lower()

    def test_every_vocabulary_value_has_template(self):
        for attr_id in vocabulary.attribute_ids():
            if attr_id == "tempo":
                for bucket in vocabulary.tempo_buckets():
                    bpm = vocabulary.default_bpm_for_bucket(bucket)
                    assert explanation_for(attr_id, {"bpm": bpm, "bucket": bucket})
                continue
            for value in vocabulary.value_domain(attr_id) or ():
                assert explanation_for(attr_id, value)

    def test_explain_attribute_object(self):
        attr = make_attribute("genre", "jazz")
        assert explain(attr)


class TestReflectiveQuestion:
    def _plan(self, **spec) -> AttributeSet:
        attrs = tuple(make_attribute(k, v, explanation="e") for k, v in spec.items())
        return AttributeSet(attributes=attrs, source_text="t")

    def test_tempo_slowdown_mentions_slower(self):
        before = self._plan(key="C major", tempo={"bpm": 120, "bucket": "fast"})
        after = self._plan(key="C major", tempo={"bpm": 80, "bucket": "slow"})
        questions = reflective_question(before, after)
        assert len(questions) == 1
        assert "slower" in questions[0]
        assert "120" in questions[0] and "80" in questions[0]

    def test_identical_plans_no_questions(self):
        plan = self._plan(key="C major", tempo={"bpm": 100, "bucket": "medium"})
        assert reflective_question(plan, plan) == []

    def test_two_changes_two_questions(self):
        before = self._plan(key="C major", tempo={"bpm": 120, "bucket": "fast"})
        after = self._plan(key="A minor", tempo={"bpm": 90, "bucket": "medium"})
        questions = reflective_question(before, after)
        assert len(questions) == 2


def backend_with(replies: list[tuple[int, str]]) -> InterpreterBackend:
    calls = iter(replies)

    def send(payload):
        return next(calls)

    return InterpreterBackend(kind="external_llm", config={"send": send})


class TestExternalBackend:
    def test_valid_reply_used(self):
        reply = json.dumps(
            {
                "attributes": [
                    {"id": "mood", "value": "happy", "explanation": "bright feel"},
                    {"id": "key", "value": "G major"},
                    {"id": "tempo", "value": {"bpm": 128, "bucket": "fast"}},
                ]
            }
        )
        plan = interpret("happy", backend_with([(200, reply)]))
        assert values(plan)["key"] == "G major"
        assert validate_attribute_set(plan) == []
        assert all(a.explanation for a in plan.attributes)

    def test_missing_globals_filled(self):
        reply = json.dumps({"attributes": [{"id": "mood", "value": "sad"}]})
        plan = interpret("sad", backend_with([(200, reply)]))
        assert "key" in plan.ids() and "tempo" in plan.ids()

    def test_repair_retry_then_malformed(self):
        calls = []

        def send(payload):
            calls.append(payload)
            return 200, "{not json"

        backend = InterpreterBackend(kind="external_llm", config={"send": send})
        with pytest.raises(MalformedBackendOutput):
            interpret("x", backend)
        assert len(calls) == 2
        assert "repair" in calls[1]

    def test_repair_retry_can_succeed(self):
        good = json.dumps({"attributes": [{"id": "key", "value": "D major"}]})
        plan = interpret("x", backend_with([(200, "garbage"), (200, good)]))
        assert values(plan)["key"] == "D major"

    def test_http_error_is_unavailable(self):
        with pytest.raises(BackendUnavailable):
            interpret("x", backend_with([(503, "down")]))

    def test_connect_failure_is_unavailable(self):
        import httpx

        def send(payload):
            raise httpx.ConnectError("refused")

        backend = InterpreterBackend(kind="external_llm", config={"send": send})
        with pytest.raises(BackendUnavailable):
            interpret("x", backend)

    _json_values = st.recursive(
        st.none() | st.booleans() | st.integers() | st.floats(allow_nan=False) | st.text(max_size=20),
        lambda children: st.lists(children, max_size=4)
        | st.dictionaries(st.text(max_size=8), children, max_size=4),
        max_leaves=12,
    )

    @settings(max_examples=120, deadline=None)
    @given(_json_values)
    def test_hardening_fuzzed_replies_never_yield_invalid_plan(self, reply):
        body = json.dumps(reply)
        backend = backend_with([(200, body), (200, body)])
        try:
            plan = interpret("some intent", backend)
        except MalformedBackendOutput:
            return
        assert validate_attribute_set(plan) == []

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.fixed_dictionaries(
                {"id": st.sampled_from(list(vocabulary.attribute_ids()) + ["bogus"]),
                 "value": st.text(max_size=12) | st.integers()},
                optional={"weight": st.floats(allow_nan=False) | st.text(max_size=3)},
            ),
            max_size=6,
        )
    )
    def test_hardening_plausible_but_wrong_attribute_lists(self, attributes):
        body = json.dumps({"attributes": attributes})
        backend = backend_with([(200, body), (200, body)])
        try:
            plan = interpret("some intent", backend)
        except MalformedBackendOutput:
            return
        assert validate_attribute_set(plan) == []
