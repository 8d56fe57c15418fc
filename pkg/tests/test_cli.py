"""CLI surface: exit codes, stdout/stderr discipline, subcommand wiring."""
import json

import numpy as np
import pytest
from click.testing import CliRunner

from animforge.cli import main
from animforge.providers.media import write_clip
from animforge.providers.base import FrameSequence, Image

from conftest import CANONICAL_NARRATIVE, flat_image

TINY_OVERRIDES = {
    "pools": {"images": 2, "videos": 3, "judge_top_k": 2},
    "frame_count": 6,
    "image_resolution": 64,
    "frame_resolution": 48,
}


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path) -> str:
    path = tmp_path / "overrides.json"
    path.write_text(json.dumps(TINY_OVERRIDES))
    return str(path)


@pytest.fixture(scope="module")
def cli_run_workspace(tmp_path_factory):
    """One tiny CLI run shared by the read-only subcommand tests."""
    tmp = tmp_path_factory.mktemp("cli-run")
    ws = tmp / "w"
    config = tmp / "overrides.json"
    config.write_text(json.dumps(TINY_OVERRIDES))
    result = CliRunner().invoke(main, [
        "run", "--narrative", CANONICAL_NARRATIVE,
        "--workspace", str(ws), "--config", str(config),
        "--seed", "7", "--providers", "mock",
    ])
    assert result.exit_code == 0, result.output + str(result.exception)
    return ws, result


class TestRun:
    def test_success_prints_manifest_path(self, cli_run_workspace):
        ws, result = cli_run_workspace
        assert result.exit_code == 0
        assert result.stdout.strip().endswith("final/manifest.json")
        assert (ws / "final/manifest.json").exists()
        assert "stage RefineStory" in result.stderr  # progress on stderr only

    def test_missing_workspace_flag_is_usage_error(self, runner, monkeypatch):
        monkeypatch.delenv("ANIMFORGE_WORKSPACE", raising=False)
        result = runner.invoke(main, ["run", "--narrative", "x"])
        assert result.exit_code == 2

    def test_narrative_from_file(self, runner, tmp_path):
        story = tmp_path / "story.txt"
        story.write_text(CANONICAL_NARRATIVE)
        result = runner.invoke(main, [
            "run", "--narrative", str(story), "--workspace", str(tmp_path / "w"),
            "--config", write_config(tmp_path), "--seed", "3",
        ])
        assert result.exit_code == 0

    def test_non_empty_workspace_advises_resume(self, runner, cli_run_workspace):
        ws, _ = cli_run_workspace
        result = runner.invoke(main, [
            "run", "--narrative", "another story", "--workspace", str(ws),
        ])
        assert result.exit_code == 1
        assert "resume" in result.stderr

    def test_workspace_env_var(self, runner, tmp_path, monkeypatch):
        monkeypatch.setenv("ANIMFORGE_WORKSPACE", str(tmp_path / "env-ws"))
        result = runner.invoke(main, [
            "run", "--narrative", CANONICAL_NARRATIVE,
            "--config", write_config(tmp_path),
        ])
        assert result.exit_code == 0
        assert (tmp_path / "env-ws/final/manifest.json").exists()


class TestResume:
    def test_completed_run_nothing_to_do(self, runner, cli_run_workspace):
        ws, _ = cli_run_workspace
        result = runner.invoke(main, ["resume", "--workspace", str(ws)])
        assert result.exit_code == 0
        assert "nothing to do" in result.stderr
        assert result.stdout.strip().endswith("final/manifest.json")

    def test_missing_workspace_errors(self, runner, tmp_path):
        result = runner.invoke(main, ["resume", "--workspace", str(tmp_path / "nope")])
        assert result.exit_code == 1


class TestInspect:
    def test_fresh_workspace_all_pending(self, runner, tmp_path):
        ws = tmp_path / "fresh"
        ws.mkdir()
        result = runner.invoke(main, ["inspect", "--workspace", str(ws)])
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        assert set(doc["stages"].values()) == {"Pending"}

    def test_completed_workspace_all_done(self, runner, cli_run_workspace):
        ws, _ = cli_run_workspace
        result = runner.invoke(main, ["inspect", "--workspace", str(ws)])
        doc = json.loads(result.stdout)
        assert set(doc["stages"].values()) == {"Done"}
        assert doc["artifacts"] > 0


class TestEval:
    def test_identical_frame_clip_scores_one(self, runner, tmp_path):
        arr = np.full((32, 32, 3), 70, dtype=np.uint8)
        arr[8:24, 12:20] = (220, 60, 10)
        frame = Image.from_array(arr)
        clip_dir = tmp_path / "clip"
        write_clip(clip_dir, FrameSequence(frames=(frame,) * 5, fps=8.0))
        result = runner.invoke(main, ["eval", "--clip", str(clip_dir)])
        assert result.exit_code == 0
        doc = json.loads(result.stdout)  # valid JSON round-trip
        assert doc["subject_consistency"] == pytest.approx(1.0, abs=1e-12)
        assert doc["background_consistency"] == pytest.approx(1.0, abs=1e-12)

    def test_alignment_uses_text(self, runner, tmp_path):
        clip_dir = tmp_path / "clip"
        write_clip(clip_dir, FrameSequence(
            frames=(flat_image(16, 16, (230, 20, 20)),) * 3, fps=8.0))
        result = runner.invoke(main, [
            "eval", "--clip", str(clip_dir), "--text", "red square",
        ])
        doc = json.loads(result.stdout)
        assert doc["text_visual_alignment"] != 0.0

    def test_workspace_aggregate(self, runner, cli_run_workspace):
        ws, _ = cli_run_workspace
        result = runner.invoke(main, ["eval", "--workspace", str(ws)])
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        assert len(doc["scenes"]) == 3
        assert "aggregate" in doc and "transitions" in doc
        assert doc["transitions"], "same-setting consecutive scenes must be scored"

    def test_requires_input(self, runner):
        result = runner.invoke(main, ["eval"])
        assert result.exit_code == 2

    def test_unreadable_clip_dir(self, runner, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        result = runner.invoke(main, ["eval", "--clip", str(empty)])
        assert result.exit_code == 1


class TestProvidersCheck:
    def test_mock_all_ok_under_a_second(self, runner):
        import time

        started = time.perf_counter()
        result = runner.invoke(main, ["providers-check", "--providers", "mock"])
        elapsed = time.perf_counter() - started
        assert result.exit_code == 0
        doc = json.loads(result.stdout)
        assert set(doc) == {"chat", "image", "video", "segmenter", "embedder"}
        assert all(entry["ok"] for entry in doc.values())
        assert elapsed < 1.0

    def test_bad_provider_config(self, runner, tmp_path):
        bad = tmp_path / "providers.json"
        bad.write_text(json.dumps({"chat": {"kind": "teleport"}}))
        result = runner.invoke(main, ["providers-check", "--providers", str(bad)])
        assert result.exit_code == 1
