"""Command-line surface: run, resume, inspect, eval, providers-check.

Human-readable progress goes to stderr; stdout carries only
machine-readable output (paths and JSON). Exit codes: 0 success,
1 domain error, 2 usage error.
"""
from __future__ import annotations

import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from .errors import AnimForgeError, NoSubjectFound
from .metrics import (
    MetricReport,
    background_consistency,
    blur_score,
    coherence,
    subject_consistency,
    text_visual_alignment,
)
from .pipeline import (
    PENDING,
    STAGE_ORDER,
    Workspace,
    config_from_dict,
    load_provider_spec,
)
from .pipeline import resume as pipeline_resume
from .pipeline import run as pipeline_run
from .prompts import GenerationParams
from .providers import (
    ChatMessage,
    ImageRequest,
    VideoRequest,
    mock_provider_set,
    provider_set_from_spec,
)
from .providers.base import Image, SegmentationMask
from .providers.media import read_clip

WORKSPACE_ENV = "ANIMFORGE_WORKSPACE"


def _err(message: str):
    click.echo(message, err=True)


def _fail(message: str):
    _err(f"error: {message}")
    sys.exit(1)


def _workspace_option(required: bool = True):
    return click.option(
        "--workspace",
        envvar=WORKSPACE_ENV,
        required=required,
        type=click.Path(),
        help=f"Workspace directory (defaults to ${WORKSPACE_ENV}).",
    )


@click.group()
def main():
    """Narrative-to-animation pipeline."""


@main.command(name="run")
@click.option("--narrative", required=True, help="Story text or a path to a text file.")
@_workspace_option()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file with run-config overrides.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--providers", "providers_src", default="mock", show_default=True,
              help='"mock" or a path to a provider-config JSON file.')
def cmd_run(narrative, workspace, config_path, seed, providers_src):
    """Run all six stages into a fresh workspace."""
    text = narrative
    if os.path.isfile(narrative):
        text = Path(narrative).read_text(encoding="utf-8")
    overrides = {}
    if config_path:
        overrides = json.loads(Path(config_path).read_text())
    doc = dict(overrides)
    doc["narrative"] = {"text": text}
    doc["seed"] = seed
    try:
        doc["providers"] = load_provider_spec(providers_src)
        config = config_from_dict(doc, workspace=str(workspace))
        summary = pipeline_run(config, progress=_err)
    except AnimForgeError as exc:
        _fail(str(exc))
        return
    _err(f"run {summary.run_id} complete; provider calls: {summary.provider_calls}")
    click.echo(summary.manifest_path)


@main.command(name="resume")
@_workspace_option()
def cmd_resume(workspace):
    """Complete an interrupted run."""
    try:
        summary = pipeline_resume(workspace, progress=_err)
    except AnimForgeError as exc:
        _fail(str(exc))
        return
    if not summary.stage_seconds:
        _err("nothing to do: run already complete")
    click.echo(summary.manifest_path)


@main.command(name="inspect")
@_workspace_option()
def cmd_inspect(workspace):
    """Print checkpoint status as JSON."""
    ws = Workspace(workspace)
    stages = {stage.value: PENDING for stage in STAGE_ORDER}
    doc = {"workspace": str(workspace), "stages": stages, "artifacts": 0}
    checkpoint_path = Path(workspace) / "run.json"
    if checkpoint_path.is_file():
        try:
            cp = ws.load()
        except AnimForgeError as exc:
            _fail(str(exc))
            return
        stages.update(cp["stages"])
        doc["run_id"] = cp["run_id"]
        doc["artifacts"] = len(cp["artifacts"])
    click.echo(json.dumps(doc, sort_keys=True, indent=2))


@main.command(name="eval")
@click.option("--clip", "clip_dir", type=click.Path(exists=True), default=None,
              help="Directory of frame_*.png files to score.")
@click.option("--workspace", envvar=WORKSPACE_ENV, type=click.Path(exists=True),
              default=None, help="Completed workspace to aggregate.")
@click.option("--text", default=None, help="Reference text for alignment scoring.")
def cmd_eval(clip_dir, workspace, text):
    """Print metric reports as JSON."""
    if clip_dir is None and workspace is None:
        raise click.UsageError("provide --clip or --workspace")
    try:
        if clip_dir is not None:
            click.echo(json.dumps(_eval_clip(clip_dir, text), sort_keys=True, indent=2))
        else:
            click.echo(json.dumps(_eval_workspace(workspace), sort_keys=True, indent=2))
    except AnimForgeError as exc:
        _fail(str(exc))
    except OSError as exc:
        _fail(f"unreadable input: {exc}")


def _eval_clip(clip_dir: str, text: str | None) -> dict:
    providers = mock_provider_set()
    clip = read_clip(clip_dir)
    try:
        subject = subject_consistency(
            clip, providers.embedder, segmenter=providers.segmenter
        )
    except NoSubjectFound:
        # nothing segmentable: score the whole frame as the subject
        full = SegmentationMask.from_bitmap(
            "subject",
            np.ones((clip.frames[0].height, clip.frames[0].width), dtype=bool),
        )
        subject = subject_consistency(clip, providers.embedder, subject_mask=full)
    background = background_consistency(clip, providers.embedder, segmenter=providers.segmenter)
    alignment = 0.0
    if text:
        alignment = text_visual_alignment(text, list(clip.frames), providers.embedder)
    report = MetricReport(
        distortion_quality=sum(blur_score(f) for f in clip.frames) / clip.frame_count,
        subject_consistency=subject,
        background_consistency=background,
        coherence=coherence(subject, background),
        text_visual_alignment=alignment,
    )
    return report.to_dict()


def _eval_workspace(workspace: str) -> dict:
    ws = Workspace(workspace)
    ws.load()
    manifest = ws.read_json("final/manifest.json")
    scenes = []
    for entry in manifest["clips"]:
        reports = ws.read_json(f"videos/{entry['scene']}/metrics.json")
        scenes.append(
            {"scene": entry["scene"], "report": reports[entry["selected"]]}
        )
    return {
        "scenes": scenes,
        "aggregate": manifest["metrics"],
        "transitions": manifest["transitions"],
    }


@main.command(name="providers-check")
@click.option("--providers", "providers_src", default="mock", show_default=True)
def cmd_providers_check(providers_src):
    """Issue one minimal call per capability and report latency."""
    try:
        spec = load_provider_spec(providers_src)
        providers = provider_set_from_spec(spec)
    except AnimForgeError as exc:
        _fail(str(exc))
        return
    tiny = Image.from_array(np.full((16, 16, 3), 128, dtype=np.uint8))
    params = GenerationParams(description="probe", motion=0, guidance_scale=10.0)
    checks = {
        "chat": lambda: providers.chat.chat(
            [ChatMessage(role="user", text="Reply with a short acknowledgement.")]
        ),
        "image": lambda: providers.image.generate_images(
            ImageRequest(prompt="probe image", seed=0), 1
        ),
        "video": lambda: providers.video.generate_videos(
            VideoRequest(conditioning_image=tiny, prompt="probe clip",
                         params=params, seed=0, frame_count=2), 1
        ),
        "segmenter": lambda: providers.segmenter.segment(tiny),
        "embedder": lambda: providers.embedder.embed_text("probe"),
    }
    results = {}
    failed = False
    for capability, call in checks.items():
        started = time.perf_counter()
        try:
            call()
            results[capability] = {
                "ok": True,
                "latency_ms": round((time.perf_counter() - started) * 1000, 2),
            }
        except Exception as exc:
            failed = True
            results[capability] = {"ok": False, "error": str(exc)}
    click.echo(json.dumps(results, sort_keys=True, indent=2))
    if failed:
        sys.exit(1)


if __name__ == "__main__":
    main()
