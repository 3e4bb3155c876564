from __future__ import annotations

import json
import zipfile
from pathlib import Path

import pytest
from click.testing import CliRunner

from musicsketch import midifile, seed
from musicsketch.cli import main
from musicsketch.library import SessionLibrary


@pytest.fixture()
def runner() -> CliRunner:
    return CliRunner()


def seed_via_cli(runner: CliRunner, corpus: Path) -> None:
    result = runner.invoke(main, ["seed", "--corpus", str(corpus)])
    assert result.exit_code == 0, result.output


class TestRun:
    def test_headless_run_saves_matching_session(self, runner, tmp_path):
        corpus = tmp_path / "corpus"
        store = tmp_path / "library"
        seed_via_cli(runner, corpus)
        result = runner.invoke(
            main,
            ["run", "--text", "happy song", "--local", "--json",
             "--corpus", str(corpus), "--store", str(store)],
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["results"][0]["report"]["overall_match"] is True
        lib = SessionLibrary(store)
        entry = lib.load_session(payload["session_id"])
        assert entry.intent_text == "happy song"
        assert Path(entry.results[0].output_ref).exists()

    def test_human_readable_output_mentions_plan_and_overall(self, runner, tmp_path):
        corpus = tmp_path / "corpus"
        seed_via_cli(runner, corpus)
        result = runner.invoke(
            main,
            ["run", "--text", "generate an exciting song", "--local",
             "--corpus", str(corpus), "--store", str(tmp_path / "library")],
        )
        assert result.exit_code == 0, result.output
        assert "overall match: True" in result.output
        assert "mood: excited" in result.output

    def test_empty_corpus_is_actionable_error(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["run", "--text", "happy song", "--local",
             "--corpus", str(tmp_path / "nothing"), "--store", str(tmp_path / "library")],
        )
        assert result.exit_code != 0
        assert "seed" in result.output

    def test_unreachable_external_renderer_falls_back_to_local(self, runner, tmp_path):
        corpus = tmp_path / "corpus"
        store = tmp_path / "library"
        seed_via_cli(runner, corpus)
        result = runner.invoke(
            main,
            ["run", "--text", "happy song", "--json",
             "--corpus", str(corpus), "--store", str(store)],
            env={"MUSICSKETCH_LMM_ENDPOINT": "http://127.0.0.1:1/render"},
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output.strip().splitlines()[-1])
        assert payload["results"][0]["backend"] == "local_synth"
        audit = (store / "audit.ndjson").read_text().splitlines()
        assert json.loads(audit[0])["outcome"] == "unreachable"

    def test_blank_intent_fails_cleanly(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["run", "--text", "   ", "--local",
             "--corpus", str(tmp_path / "corpus"), "--store", str(tmp_path / "library")],
        )
        assert result.exit_code != 0


class TestCorpusCommands:
    def test_seed_then_ingest_directory(self, runner, tmp_path):
        corpus = tmp_path / "corpus"
        src = tmp_path / "raw"
        src.mkdir()
        prompt = seed.build_segment_prompt("E minor", 90, pattern="wave")
        (src / "clip.mid").write_bytes(midifile.write_midi(prompt))
        (src / "clip.json").write_text(json.dumps({"tags": {"key": "E minor", "genre": "folk"}}))
        result = runner.invoke(main, ["ingest", str(src), "--corpus", str(corpus)])
        assert result.exit_code == 0, result.output
        assert "1 segment(s)" in result.output
        manifest = json.loads((corpus / "manifest.json").read_text())
        assert len(manifest["segments"]) == 1

    def test_rules_list(self, runner):
        result = runner.invoke(main, ["rules", "list"])
        assert result.exit_code == 0
        assert "transpose_key" in result.output
        assert "apply_swing" in result.output


class TestExport:
    def test_export_round_trip(self, runner, tmp_path):
        corpus = tmp_path / "corpus"
        store = tmp_path / "library"
        seed_via_cli(runner, corpus)
        run = runner.invoke(
            main,
            ["run", "--text", "happy song", "--local", "--json",
             "--corpus", str(corpus), "--store", str(store)],
        )
        session_id = json.loads(run.output)["session_id"]
        out = tmp_path / "session.zip"
        result = runner.invoke(
            main, ["export", session_id, "--store", str(store), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert "session.json" in zipfile.ZipFile(out).namelist()

    def test_export_unknown_session_fails(self, runner, tmp_path):
        result = runner.invoke(
            main, ["export", "s-ghost", "--store", str(tmp_path / "library")]
        )
        assert result.exit_code != 0
