"""Prompt templates and parsers for the structured replies they elicit.

Templates are data: UTF-8 text resources with "{name}" slots, one file per
instruction. Users can override any of them by pointing a PromptLibrary at
a directory containing files of the same names.
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from ..errors import (
    IndexOutOfRange,
    MissingSlot,
    NoJsonFound,
    NoVerdictFound,
    SchemaViolation,
    UnknownSlot,
)

SLOT_PATTERN = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

MOTION_MIN, MOTION_MAX = 0, 4
GUIDANCE_MAX = 100.0


class TemplateId(enum.Enum):
    REFINE = "refine"
    EXTRACT_PROFILES = "extract_profiles"
    GENERATE_SCENES = "generate_scenes"
    VERIFY = "verify"
    IMAGE_PROMPTS = "image_prompts"
    IMAGE_JUDGE = "image_judge"
    VIDEO_PROMPTS = "video_prompts"
    PARAM_PREDICT = "param_predict"
    VIDEO_JUDGE = "video_judge"


@dataclass(frozen=True)
class PromptTemplate:
    id: TemplateId
    body: str
    slots: frozenset[str] = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "slots", frozenset(SLOT_PATTERN.findall(self.body))
        )


class PromptLibrary:
    """Loads the bundled templates, with optional per-file overrides."""

    def __init__(self, override_dir: str | Path | None = None):
        self._override_dir = Path(override_dir) if override_dir else None
        self._cache: dict[TemplateId, PromptTemplate] = {}

    def get(self, template_id: TemplateId) -> PromptTemplate:
        cached = self._cache.get(template_id)
        if cached is not None:
            return cached
        name = f"{template_id.value}.txt"
        if self._override_dir is not None and (self._override_dir / name).is_file():
            body = (self._override_dir / name).read_text(encoding="utf-8")
        else:
            body = (
                resources.files("animforge.prompts")
                .joinpath("templates", name)
                .read_text(encoding="utf-8")
            )
        template = PromptTemplate(id=template_id, body=body)
        self._cache[template_id] = template
        return template


def render(template: PromptTemplate, slots: Mapping[str, str]) -> str:
    """Substitute every "{name}" in one pass; values are inserted verbatim
    and never re-scanned for slots."""
    for name in template.slots:
        if name not in slots:
            raise MissingSlot(name)
        if not slots[name]:
            raise MissingSlot(f"{name} (empty value)")
    for name in slots:
        if name not in template.slots:
            raise UnknownSlot(name)
    return SLOT_PATTERN.sub(lambda m: slots[m.group(1)], template.body)


@dataclass(frozen=True)
class JudgeVerdict:
    chosen_index: int  # 1-based
    analysis: str


_VERDICT_PATTERN = re.compile(r"the\s+answer\s+is\s+image\s+(\d+)", re.IGNORECASE)


def parse_judge_verdict(reply: str, pool_size: int) -> JudgeVerdict:
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    match = _VERDICT_PATTERN.search(reply)
    if match is None:
        raise NoVerdictFound(f"no 'The answer is image x' in reply: {reply[:80]!r}")
    k = int(match.group(1))
    if k < 1 or k > pool_size:
        raise IndexOutOfRange(f"image {k} outside pool of {pool_size}")
    analysis = reply[match.end():].lstrip(" \t.,:;!-\n")
    return JudgeVerdict(chosen_index=k, analysis=analysis)


NO_PROBLEM_SENTINEL = "No problem found."


@dataclass(frozen=True)
class RepairVerdict:
    no_problem: bool
    revised_text: str = ""


def parse_repair_verdict(reply: str) -> RepairVerdict:
    if NO_PROBLEM_SENTINEL in reply:
        return RepairVerdict(no_problem=True)
    return RepairVerdict(no_problem=False, revised_text=reply)


class Zoom(enum.Enum):
    IN = "in"
    OUT = "out"
    NONE = None


class Pan(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    NONE = None


class Tilt(enum.Enum):
    UP = "up"
    DOWN = "down"
    NONE = None


class Rotate(enum.Enum):
    CW = "cw"
    CCW = "ccw"
    NONE = None


@dataclass(frozen=True)
class CameraMove:
    zoom: Zoom = Zoom.NONE
    pan: Pan = Pan.NONE
    tilt: Tilt = Tilt.NONE
    rotate: Rotate = Rotate.NONE


@dataclass(frozen=True)
class GenerationParams:
    description: str
    motion: int
    guidance_scale: float
    negative_prompt: str = ""
    camera: CameraMove = CameraMove()

    def __post_init__(self):
        if not MOTION_MIN <= self.motion <= MOTION_MAX:
            raise ValueError(f"motion {self.motion} outside {MOTION_MIN}..{MOTION_MAX}")
        if not 0 < self.guidance_scale <= GUIDANCE_MAX:
            raise ValueError(f"guidance_scale {self.guidance_scale} outside (0, {GUIDANCE_MAX}]")


def serialize_params(params: GenerationParams) -> str:
    """Canonical wire form; key naming and null usage match the predictor's
    JSON template exactly."""
    doc = {
        "description": params.description,
        "option": {
            "parameters": {
                "motion": params.motion,
                "guidanceScale": params.guidance_scale,
                "negativePrompt": params.negative_prompt,
            },
            "camera": {
                "zoom": params.camera.zoom.value,
                "pan": params.camera.pan.value,
                "tilt": params.camera.tilt.value,
                "rotate": params.camera.rotate.value,
            },
        },
    }
    return json.dumps(doc, indent=2)


def _first_json_object(reply: str) -> dict:
    text = re.sub(r"^\s*```[a-zA-Z]*\s*$", "", reply, flags=re.MULTILINE)
    decoder = json.JSONDecoder()
    pos = text.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(text, pos)
        except ValueError:
            pos = text.find("{", pos + 1)
            continue
        if isinstance(obj, dict):
            return obj
        pos = text.find("{", pos + 1)
    raise NoJsonFound(f"no JSON object in reply: {reply[:80]!r}")


def _camera_value(field_name: str, value, enum_cls):
    if value is None:
        return enum_cls.NONE
    if isinstance(value, str):
        for member in enum_cls:
            if member.value == value.lower():
                return member
    raise SchemaViolation(f"camera.{field_name}", f"invalid value {value!r}")


def parse_params(reply: str) -> GenerationParams:
    """Locate and validate the first JSON object in an arbitrary reply."""
    doc = _first_json_object(reply)

    description = doc.get("description", "")
    if not isinstance(description, str):
        raise SchemaViolation("description", "must be a string")

    option = doc.get("option")
    if not isinstance(option, dict):
        raise SchemaViolation("option", "missing or not an object")
    parameters = option.get("parameters")
    if not isinstance(parameters, dict):
        raise SchemaViolation("option.parameters", "missing or not an object")

    motion = parameters.get("motion")
    if isinstance(motion, bool) or not isinstance(motion, int):
        raise SchemaViolation("parameters.motion", f"must be an integer, got {motion!r}")
    if not MOTION_MIN <= motion <= MOTION_MAX:
        raise SchemaViolation(
            "parameters.motion", f"{motion} outside {MOTION_MIN}..{MOTION_MAX}"
        )

    guidance = parameters.get("guidanceScale")
    if isinstance(guidance, bool) or not isinstance(guidance, (int, float)):
        raise SchemaViolation("parameters.guidanceScale", f"must be a number, got {guidance!r}")
    if not 0 < guidance <= GUIDANCE_MAX:
        raise SchemaViolation(
            "parameters.guidanceScale", f"{guidance} outside (0, {GUIDANCE_MAX}]"
        )

    negative = parameters.get("negativePrompt", "")
    if not isinstance(negative, str):
        raise SchemaViolation("parameters.negativePrompt", "must be a string")

    camera_doc = option.get("camera", {})
    if camera_doc is None:
        camera_doc = {}
    if not isinstance(camera_doc, dict):
        raise SchemaViolation("camera", "must be an object or null")
    camera = CameraMove(
        zoom=_camera_value("zoom", camera_doc.get("zoom"), Zoom),
        pan=_camera_value("pan", camera_doc.get("pan"), Pan),
        tilt=_camera_value("tilt", camera_doc.get("tilt"), Tilt),
        rotate=_camera_value("rotate", camera_doc.get("rotate"), Rotate),
    )
    return GenerationParams(
        description=description,
        motion=motion,
        guidance_scale=float(guidance),
        negative_prompt=negative,
        camera=camera,
    )
