"""The six-stage orchestrator.

Every provider interaction goes through Workspace.cached_call, so a
resumed run skips any call whose artifacts already exist with matching
digests and replays the rest deterministically. Stage functions read
their inputs from the workspace (never from in-memory state of earlier
stages), which makes run and resume the same code path.
"""
from __future__ import annotations

import enum
import hashlib
import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..curation import (
    CandidatePool,
    consistency_repair,
    judge_select_image,
    judge_select_video,
    rank_candidates,
)
from ..errors import (
    AnimForgeError,
    NoJsonFound,
    RefinementFailed,
    SchemaViolation,
    ScriptUnrepairable,
    StageFailed,
)
from ..metrics import (
    MetricReport,
    background_consistency,
    clip_report,
    coherence,
    contact_sheet,
    image_image_similarity,
)
from ..prompts import (
    PromptLibrary,
    TemplateId,
    parse_params,
    parse_repair_verdict,
    render,
    serialize_params,
)
from ..providers import (
    CallCounter,
    ChatMessage,
    ImageRequest,
    ProviderSet,
    VideoRequest,
    counting_provider_set,
    mock_provider_set,
    provider_set_from_spec,
    stable_hash64,
)
from ..providers.base import FrameSequence, Image
from ..providers.media import (
    clip_to_files,
    image_from_png,
    png_bytes,
    read_clip,
    resize_nearest,
)
from ..script import (
    RefinedStory,
    Script,
    parse_script,
    report_to_json,
    script_from_json,
    script_to_json,
    serialize_script,
    validate_script,
)
from .config import RunConfig, config_from_dict
from .workspace import DONE, IN_PROGRESS, Workspace


class StageId(enum.Enum):
    REFINE_STORY = "RefineStory"
    GENERATE_SCRIPT = "GenerateScript"
    GENERATE_ASSETS = "GenerateAssets"
    GENERATE_SCENE_IMAGES = "GenerateSceneImages"
    PRODUCE_VIDEOS = "ProduceVideos"
    ENHANCE_AND_SPLICE = "EnhanceAndSplice"


STAGE_ORDER = tuple(StageId)

PARAM_FORMAT_REMINDER = (
    "\n\nReminder: reply with one JSON object exactly matching the template."
)


@dataclass
class RunSummary:
    run_id: str
    stage_seconds: dict[str, float]
    provider_calls: dict[str, int]
    manifest_path: str
    manifest_digest: str
    final_report: MetricReport | None


@dataclass
class _Context:
    ws: Workspace
    config: RunConfig
    providers: ProviderSet
    counter: CallCounter
    library: PromptLibrary
    progress: object = None  # optional callable(str)

    def say(self, message: str):
        if self.progress is not None:
            self.progress(message)


def _chat(ctx: _Context, text: str, images: tuple[Image, ...] = ()) -> str:
    return ctx.providers.chat.chat(
        [ChatMessage(role="user", text=text, attached_images=images)]
    )


def _cached_text(ctx: _Context, key: str, rel: str, produce) -> str:
    files = ctx.ws.cached_call(key, lambda: {rel: produce().encode("utf-8")})
    return files[rel].decode("utf-8")


def _scene_map(ctx: _Context, fn, scenes):
    if ctx.config.scene_parallelism <= 1 or len(scenes) <= 1:
        for scene in scenes:
            fn(scene)
        return
    with ThreadPoolExecutor(max_workers=ctx.config.scene_parallelism) as pool:
        for future in [pool.submit(fn, s) for s in scenes]:
            future.result()


def _slugify(name: str, used: set[str]) -> str:
    base = re.sub(r"[^A-Za-z0-9_-]+", "_", name).strip("_") or "item"
    slug, k = base, 2
    while slug in used:
        slug = f"{base}_{k}"
        k += 1
    used.add(slug)
    return slug


def _load_script(ctx: _Context) -> Script:
    return script_from_json(ctx.ws.read_text("script/script.json"))


def _load_assets(ctx: _Context) -> dict[str, Image]:
    index = ctx.ws.read_json("assets/index.json")
    return {
        name: image_from_png(
            ctx.ws.read_bytes(f"assets/{entry['dir']}/cand_{entry['selected']}.png")
        )
        for name, entry in index.items()
    }


def _scene_final_image(ctx: _Context, scene_index: int) -> Image:
    return image_from_png(ctx.ws.read_bytes(f"scenes/{scene_index}/final.png"))


# -- stage 1: refine the narrative ---------------------------------------


def stage_refine_story(ctx: _Context) -> RefinedStory:
    config = ctx.config
    rendered = render(
        ctx.library.get(TemplateId.REFINE), {"Narrative": config.narrative.text}
    )
    low, high = config.word_count_band
    reply = _cached_text(
        ctx, "refine:1", "story/refined_1.txt", lambda: _chat(ctx, rendered)
    )
    if not low <= len(reply.split()) <= high:
        reminder = (
            rendered
            + f"\n\nReminder: the story must be approximately 150 words "
            f"(between {low} and {high} words)."
        )
        reply = _cached_text(
            ctx, "refine:2", "story/refined_2.txt", lambda: _chat(ctx, reminder)
        )
        if not low <= len(reply.split()) <= high:
            raise RefinementFailed(
                f"refined story has {len(reply.split())} words, outside [{low}, {high}]"
            )
    ctx.ws.write_artifact("story/refined.txt", reply.encode("utf-8"))
    return RefinedStory.from_text(reply, source=config.narrative.id)


# -- stage 2: structured script with verification loop --------------------


def stage_generate_script(ctx: _Context) -> Script:
    story = ctx.ws.read_text("story/refined.txt")
    profiles_reply = _cached_text(
        ctx, "script:profiles", "script/raw_profiles.txt",
        lambda: _chat(ctx, render(
            ctx.library.get(TemplateId.EXTRACT_PROFILES), {"RefinedStory": story}
        )),
    )
    scenes_reply = _cached_text(
        ctx, "script:scenes", "script/raw_scenes.txt",
        lambda: _chat(ctx, render(
            ctx.library.get(TemplateId.GENERATE_SCENES), {"Profiles": profiles_reply}
        )),
    )
    script = parse_script(profiles_reply + "\n\n" + scenes_reply)

    verify_template = ctx.library.get(TemplateId.VERIFY)
    report = validate_script(script)
    for round_no in range(ctx.config.max_repair_iters + 1):
        report = validate_script(script)
        doc = serialize_script(script)
        reply = _cached_text(
            ctx, f"script:verify:{round_no}", f"script/verify_{round_no}.txt",
            lambda d=doc: _chat(ctx, render(verify_template, {"Script": d})),
        )
        verdict = parse_repair_verdict(reply)
        if report.ok and verdict.no_problem:
            break
        if round_no == ctx.config.max_repair_iters:
            raise ScriptUnrepairable(
                f"verification budget exhausted with {len(report.violations)} "
                "local violation(s) or an unresolved reviewer objection"
            )
        if not verdict.no_problem:
            try:
                script = parse_script(verdict.revised_text)
            except AnimForgeError:
                pass  # unusable revision burns the round, keep current script

    ctx.ws.write_artifact("script/script.json", script_to_json(script).encode("utf-8"))
    ctx.ws.write_artifact(
        "script/validation.json", report_to_json(report).encode("utf-8")
    )
    return script


# -- stage 3: character and setting images --------------------------------


def stage_generate_assets(ctx: _Context) -> dict[str, Image]:
    config = ctx.config
    script = _load_script(ctx)
    entries = [("cast", c.name, c.description) for c in script.characters]
    entries += [("setting", s.name, s.description) for s in script.settings]

    used: set[str] = set()
    index: dict[str, dict] = {}
    assets: dict[str, Image] = {}
    n = config.pools.images
    for marker, name, description in entries:
        slug = _slugify(name, used)
        prompt = f"{marker}: {name} | {description}"
        seed = stable_hash64("asset", config.seed, name)
        request = ImageRequest(prompt=prompt, seed=seed)

        def produce_pool(req=request, s=slug):
            images = ctx.providers.image.generate_images(req, n)
            return {f"assets/{s}/cand_{i}.png": png_bytes(im) for i, im in enumerate(images)}

        files = ctx.ws.cached_call(f"asset:{slug}:pool", produce_pool)
        images = [image_from_png(files[f"assets/{slug}/cand_{i}.png"]) for i in range(n)]
        pool = CandidatePool(items=tuple(images), provenance=f"asset:{name}:seed={seed}")

        def produce_selection(p=pool, nm=name, desc=description, s=slug):
            idx = judge_select_image(p, f"{nm}: {desc}", ctx.providers.chat, ctx.library)
            doc = json.dumps({"selected": idx}, sort_keys=True, indent=2) + "\n"
            return {f"assets/{s}/selected.json": doc.encode("utf-8")}

        sel = ctx.ws.cached_call(f"asset:{slug}:select", produce_selection)
        idx = json.loads(sel[f"assets/{slug}/selected.json"])["selected"]
        assets[name] = images[idx]
        index[name] = {"dir": slug, "selected": idx}
        ctx.say(f"asset {name!r}: {n} candidates, kept #{idx}")

    ctx.ws.write_json_artifact("assets/index.json", index)
    return assets


# -- stage 4: scene images with consistency repair -------------------------


def stage_generate_scene_images(ctx: _Context) -> None:
    config = ctx.config
    script = _load_script(ctx)
    assets = _load_assets(ctx)
    characters = {c.name: c for c in script.characters}
    settings = {s.name: s for s in script.settings}

    def one_scene(scene):
        i = scene.index
        char_text = "\n".join(
            f"{name}: {characters[name].description}" for name in scene.characters
        )
        sp = settings[scene.setting]
        setting_text = f"{sp.name} ({sp.placement.value.capitalize()}): {sp.description}"
        rendered = render(
            ctx.library.get(TemplateId.IMAGE_PROMPTS),
            {
                "SceneDescription": scene.description,
                "CharacterProfiles": char_text,
                "SettingProfile": setting_text,
                "RenamingRule": config.renaming_rule,
            },
        )
        prompt = _cached_text(
            ctx, f"scene:{i}:prompt", f"scenes/{i}/prompt.txt",
            lambda: _chat(ctx, rendered),
        )
        references = tuple(assets[name] for name in scene.characters)
        references += (assets[scene.setting],)
        request = ImageRequest(
            prompt=prompt,
            reference_images=references,
            seed=stable_hash64("scene-image", config.seed, i),
        )
        n = config.pools.images

        def produce_pool(req=request):
            images = ctx.providers.image.generate_images(req, n)
            return {
                f"scenes/{i}/cand_{j}.png": png_bytes(im) for j, im in enumerate(images)
            }

        files = ctx.ws.cached_call(f"scene:{i}:pool", produce_pool)
        images = [
            image_from_png(files[f"scenes/{i}/cand_{j}.png"]) for j in range(n)
        ]
        pool = CandidatePool(items=tuple(images), provenance=f"scene:{i}")

        def produce_selection(p=pool):
            idx = judge_select_image(
                p, scene.description, ctx.providers.chat, ctx.library
            )
            doc = json.dumps({"selected": idx}, sort_keys=True, indent=2) + "\n"
            return {f"scenes/{i}/selected.json": doc.encode("utf-8")}

        sel = ctx.ws.cached_call(f"scene:{i}:select", produce_selection)
        idx = json.loads(sel[f"scenes/{i}/selected.json"])["selected"]

        def produce_repair(chosen=images[idx]):
            expected = [(characters[name], assets[name]) for name in scene.characters]
            outcome = consistency_repair(
                chosen,
                expected,
                ctx.providers.segmenter,
                ctx.providers.image,
                ctx.providers.chat,
                max_iters=config.max_repair_iters,
                seed=stable_hash64("repair", config.seed, i),
            )
            audit = {
                "iterations_used": outcome.iterations_used,
                "passed": outcome.passed,
                "log": list(outcome.audit_log),
            }
            return {
                f"scenes/{i}/final.png": png_bytes(outcome.final_item),
                f"scenes/{i}/repair/audit.json": (
                    json.dumps(audit, sort_keys=True, indent=2) + "\n"
                ).encode("utf-8"),
            }

        ctx.ws.cached_call(f"scene:{i}:repair", produce_repair)
        ctx.say(f"scene {i}: image selected and repaired")

    _scene_map(ctx, one_scene, script.scenes)


# -- stage 5: video candidates per scene -----------------------------------


def stage_produce_videos(ctx: _Context) -> None:
    config = ctx.config
    script = _load_script(ctx)
    characters = {c.name: c for c in script.characters}

    def one_scene(scene):
        i = scene.index
        char_text = "\n".join(
            f"{name}: {characters[name].description}" for name in scene.characters
        )
        video_prompt = _cached_text(
            ctx, f"video:{i}:prompt", f"videos/{i}/prompt.txt",
            lambda: _chat(ctx, render(
                ctx.library.get(TemplateId.VIDEO_PROMPTS),
                {"SceneDescription": scene.description, "CharacterProfiles": char_text},
            )),
        )
        base_prompt = render(
            ctx.library.get(TemplateId.PARAM_PREDICT),
            {"Prompt": video_prompt, "SceneDescription": scene.description},
        )
        reply = _cached_text(
            ctx, f"video:{i}:params:0", f"videos/{i}/params_reply_0.txt",
            lambda: _chat(ctx, base_prompt),
        )
        try:
            params = parse_params(reply)
        except (SchemaViolation, NoJsonFound):
            reply = _cached_text(
                ctx, f"video:{i}:params:1", f"videos/{i}/params_reply_1.txt",
                lambda: _chat(ctx, base_prompt + PARAM_FORMAT_REMINDER),
            )
            params = parse_params(reply)  # second failure fails the stage
        ctx.ws.write_json_artifact(
            f"videos/{i}/params.json",
            {"raw": reply, "parsed": json.loads(serialize_params(params))},
        )

        conditioning = resize_nearest(
            _scene_final_image(ctx, i), config.frame_resolution, config.frame_resolution
        )
        request = VideoRequest(
            conditioning_image=conditioning,
            prompt=video_prompt,
            params=params,
            seed=stable_hash64("video", config.seed, i),
            frame_count=config.frame_count,
        )

        def produce_pool(req=request):
            clips = ctx.providers.video.generate_videos(req, config.pools.videos)
            files: dict[str, bytes] = {}
            for j, clip in enumerate(clips):
                for rel, data in clip_to_files(clip).items():
                    files[f"videos/{i}/cand_{j}/{rel}"] = data
            return files

        ctx.ws.cached_call(f"video:{i}:pool", produce_pool)
        ctx.say(f"scene {i}: {config.pools.videos} video candidates (motion {params.motion})")

    _scene_map(ctx, one_scene, script.scenes)


# -- stage 6: evaluate, judge, splice ---------------------------------------


def _selected_clip_dir(ctx: _Context, scene_index: int) -> str:
    doc = ctx.ws.read_json(f"videos/{scene_index}/selected.json")
    return f"videos/{scene_index}/cand_{doc['selected']}"


def stage_enhance_and_splice(ctx: _Context) -> dict:
    config = ctx.config
    script = _load_script(ctx)
    embedder = ctx.providers.embedder
    segmenter = ctx.providers.segmenter

    def one_scene(scene):
        i = scene.index
        clips = [
            read_clip(ctx.ws.path(f"videos/{i}/cand_{j}"))
            for j in range(config.pools.videos)
        ]

        def produce_metrics():
            reports = [
                clip_report(c, scene.description, embedder, segmenter) for c in clips
            ]
            doc = json.dumps(
                [r.to_dict() for r in reports], sort_keys=True, indent=2
            ) + "\n"
            return {f"videos/{i}/metrics.json": doc.encode("utf-8")}

        files = ctx.ws.cached_call(f"eval:{i}", produce_metrics)
        reports = [
            MetricReport.from_dict(d)
            for d in json.loads(files[f"videos/{i}/metrics.json"])
        ]
        pool = CandidatePool(items=tuple(clips), provenance=f"video:{i}").with_scores(reports)
        ranked = rank_candidates(pool, config.pools.judge_top_k)
        sheets = [contact_sheet(clips[j], config.contact_sheet_frames) for j in ranked]

        def produce_selection():
            pick = judge_select_video(
                sheets, scene.description, ctx.providers.chat, ctx.library
            )
            doc = {
                "selected": ranked[pick],
                "ranked": ranked,
                "sheet_indices": list(sheets[0].source_frame_indices),
            }
            return {
                f"videos/{i}/selected.json": (
                    json.dumps(doc, sort_keys=True, indent=2) + "\n"
                ).encode("utf-8")
            }

        ctx.ws.cached_call(f"video:{i}:select", produce_selection)
        ctx.say(f"scene {i}: ranked top {len(ranked)}, judged final clip")

    _scene_map(ctx, one_scene, script.scenes)

    # splice the selected clips in scene order
    def produce_splice():
        files: dict[str, bytes] = {}
        clip_entries = []
        selected_reports: list[MetricReport] = []
        boundary_pairs = []
        global_frame = 0
        previous = None  # (setting, last frame Image)
        for scene in script.scenes:
            i = scene.index
            clip_dir = _selected_clip_dir(ctx, i)
            selected_index = int(clip_dir.rsplit("_", 1)[1])
            clip = read_clip(ctx.ws.path(clip_dir))
            reports = [
                MetricReport.from_dict(d)
                for d in ctx.ws.read_json(f"videos/{i}/metrics.json")
            ]
            selected_reports.append(reports[selected_index])
            for frame_idx in range(clip.frame_count):
                data = ctx.ws.read_bytes(f"{clip_dir}/frames/frame_{frame_idx:04d}.png")
                files[f"final/frames/frame_{global_frame:04d}.png"] = data
                global_frame += 1
            clip_entries.append(
                {
                    "scene": i,
                    "path": clip_dir,
                    "frames": clip.frame_count,
                    "setting": scene.setting,
                    "selected": selected_index,
                }
            )
            if previous is not None and previous[0] == scene.setting:
                boundary = FrameSequence(
                    frames=(previous[1], clip.frames[0]), fps=config.fps
                )
                boundary_pairs.append(
                    {
                        "scenes": [i - 1, i],
                        "background_consistency": background_consistency(
                            boundary, embedder, segmenter
                        ),
                    }
                )
            previous = (scene.setting, clip.frames[-1])

        aggregate = _aggregate_report(ctx, script, selected_reports)
        manifest = {
            "run_id": ctx.ws.run_id,
            "clips": clip_entries,
            "fps": config.fps,
            "total_frames": global_frame,
            "metrics": aggregate.to_dict(),
            "transitions": boundary_pairs,
        }
        canonical = json.dumps(manifest, sort_keys=True, indent=2)
        manifest["digest"] = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
        files["final/manifest.json"] = (
            json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        ).encode("utf-8")
        return files

    ctx.ws.cached_call("splice", produce_splice)
    return ctx.ws.read_json("final/manifest.json")


def _aggregate_report(
    ctx: _Context, script: Script, reports: list[MetricReport]
) -> MetricReport:
    def mean(values):
        return sum(values) / len(values)

    subject = mean([r.subject_consistency for r in reports])
    background = mean([r.background_consistency for r in reports])
    scene_images = [_scene_final_image(ctx, s.index) for s in script.scenes]
    ii_sim = None
    if len(scene_images) >= 2:
        pairs = [
            image_image_similarity(a, b, ctx.providers.embedder)
            for a, b in zip(scene_images, scene_images[1:])
        ]
        ii_sim = mean(pairs)
    return MetricReport(
        distortion_quality=mean([r.distortion_quality for r in reports]),
        subject_consistency=subject,
        background_consistency=background,
        coherence=coherence(subject, background),
        text_visual_alignment=mean([r.text_visual_alignment for r in reports]),
        image_image_similarity=ii_sim,
    )


# -- run / resume ------------------------------------------------------------


_STAGE_FUNCS = {
    StageId.REFINE_STORY: stage_refine_story,
    StageId.GENERATE_SCRIPT: stage_generate_script,
    StageId.GENERATE_ASSETS: stage_generate_assets,
    StageId.GENERATE_SCENE_IMAGES: stage_generate_scene_images,
    StageId.PRODUCE_VIDEOS: stage_produce_videos,
    StageId.ENHANCE_AND_SPLICE: stage_enhance_and_splice,
}


def _build_providers(config: RunConfig) -> ProviderSet:
    if not config.providers:
        return mock_provider_set(
            seed=config.seed,
            scene_count=config.scene_count,
            image_resolution=config.image_resolution,
            fps=config.fps,
        )
    return provider_set_from_spec(
        config.providers,
        seed=config.seed,
        scene_count=config.scene_count,
        image_resolution=config.image_resolution,
        fps=config.fps,
    )


def _execute(ctx: _Context) -> RunSummary:
    stage_seconds: dict[str, float] = {}
    for stage in STAGE_ORDER:
        if ctx.ws.stage_status(stage.value) == DONE:
            continue
        ctx.say(f"stage {stage.value}: starting")
        ctx.ws.set_stage_status(stage.value, IN_PROGRESS)
        started = time.perf_counter()
        try:
            _STAGE_FUNCS[stage](ctx)
        except StageFailed:
            raise
        except Exception as exc:
            raise StageFailed(stage.value, str(exc)) from exc
        ctx.ws.set_stage_status(stage.value, DONE)
        stage_seconds[stage.value] = time.perf_counter() - started
        ctx.say(f"stage {stage.value}: done in {stage_seconds[stage.value]:.2f}s")

    manifest = ctx.ws.read_json("final/manifest.json")
    return RunSummary(
        run_id=ctx.ws.run_id,
        stage_seconds=stage_seconds,
        provider_calls=dict(ctx.counter.counts),
        manifest_path=str(ctx.ws.path("final/manifest.json")),
        manifest_digest=manifest["digest"],
        final_report=MetricReport.from_dict(manifest["metrics"]),
    )


def run(
    config: RunConfig,
    provider_wrapper=None,
    progress=None,
) -> RunSummary:
    """Execute all six stages into a fresh workspace."""
    ws = Workspace(config.workspace)
    ws.init_run(
        config.canonical_json(), config.digest(), [s.value for s in STAGE_ORDER]
    )
    return _run_with(ws, config, provider_wrapper, progress)


def resume(
    workspace: str | Path,
    provider_wrapper=None,
    progress=None,
) -> RunSummary:
    """Continue an interrupted run: verify recorded artifacts, skip Done
    stages, re-execute the rest. Outputs are byte-identical to an
    uninterrupted run with the same config and seed."""
    ws = Workspace(workspace)
    ws.load()
    config = config_from_dict(
        json.loads(ws.load_config_json()), workspace=str(workspace)
    )
    ws.require_config(config.digest())
    ws.verify_recorded_artifacts()
    return _run_with(ws, config, provider_wrapper, progress)


def _run_with(ws: Workspace, config: RunConfig, provider_wrapper, progress) -> RunSummary:
    providers = _build_providers(config)
    if provider_wrapper is not None:
        providers = provider_wrapper(providers)
    counter = CallCounter()
    ctx = _Context(
        ws=ws,
        config=config,
        providers=counting_provider_set(providers, counter),
        counter=counter,
        library=PromptLibrary(config.template_dir),
        progress=progress,
    )
    return _execute(ctx)
