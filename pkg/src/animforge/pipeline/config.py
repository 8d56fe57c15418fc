"""Run configuration: provider bindings, pool sizes, clip geometry and the
canonical digest that ties a workspace to the config that produced it."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigInvalid
from ..script import Narrative

DEFAULT_RENAMING_RULE = "Keep every character's full name unchanged."


@dataclass(frozen=True)
class PoolSizes:
    images: int = 4
    videos: int = 10
    judge_top_k: int = 3


@dataclass(frozen=True)
class RunConfig:
    narrative: Narrative
    workspace: str
    seed: int = 0
    providers: dict = field(default_factory=dict)  # capability -> binding spec
    pools: PoolSizes = PoolSizes()
    frame_count: int = 24
    fps: float = 8.0
    max_repair_iters: int = 3
    image_resolution: int = 512
    frame_resolution: int = 256
    scene_count: int = 3  # scenes the mock chat emits; remote chats decide themselves
    scene_parallelism: int = 1
    contact_sheet_frames: int = 5
    word_count_band: tuple[int, int] = (75, 300)
    renaming_rule: str = DEFAULT_RENAMING_RULE
    template_dir: str | None = None

    def __post_init__(self):
        if min(self.pools.images, self.pools.videos, self.pools.judge_top_k) < 1:
            raise ConfigInvalid("pool sizes must be >= 1")
        if self.pools.judge_top_k > self.pools.videos:
            raise ConfigInvalid("judge_top_k cannot exceed the video pool size")
        if self.frame_count < 2:
            raise ConfigInvalid("frame_count must be >= 2")
        if self.fps <= 0:
            raise ConfigInvalid("fps must be positive")
        if self.max_repair_iters < 1:
            raise ConfigInvalid("max_repair_iters must be >= 1")
        if self.scene_parallelism < 1:
            raise ConfigInvalid("scene_parallelism must be >= 1")
        if self.contact_sheet_frames < 2 or self.contact_sheet_frames > self.frame_count:
            raise ConfigInvalid("contact_sheet_frames must be in [2, frame_count]")

    def canonical_dict(self) -> dict:
        """Everything that determines run outputs; workspace path excluded
        so a moved workspace still resumes."""
        return {
            "narrative": {"text": self.narrative.text, "id": self.narrative.id},
            "seed": self.seed,
            "providers": self.providers,
            "pools": {
                "images": self.pools.images,
                "videos": self.pools.videos,
                "judge_top_k": self.pools.judge_top_k,
            },
            "frame_count": self.frame_count,
            "fps": self.fps,
            "max_repair_iters": self.max_repair_iters,
            "image_resolution": self.image_resolution,
            "frame_resolution": self.frame_resolution,
            "scene_count": self.scene_count,
            "scene_parallelism": self.scene_parallelism,
            "contact_sheet_frames": self.contact_sheet_frames,
            "word_count_band": list(self.word_count_band),
            "renaming_rule": self.renaming_rule,
            "template_dir": self.template_dir,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_dict(), sort_keys=True, indent=2) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def config_from_dict(doc: dict, workspace: str) -> RunConfig:
    pools = doc.get("pools", {})
    return RunConfig(
        narrative=Narrative(
            text=doc["narrative"]["text"], id=doc["narrative"].get("id", "")
        ),
        workspace=workspace,
        seed=doc.get("seed", 0),
        providers=doc.get("providers", {}),
        pools=PoolSizes(
            images=pools.get("images", 4),
            videos=pools.get("videos", 10),
            judge_top_k=pools.get("judge_top_k", 3),
        ),
        frame_count=doc.get("frame_count", 24),
        fps=doc.get("fps", 8.0),
        max_repair_iters=doc.get("max_repair_iters", 3),
        image_resolution=doc.get("image_resolution", 512),
        frame_resolution=doc.get("frame_resolution", 256),
        scene_count=doc.get("scene_count", 3),
        scene_parallelism=doc.get("scene_parallelism", 1),
        contact_sheet_frames=doc.get("contact_sheet_frames", 5),
        word_count_band=tuple(doc.get("word_count_band", (75, 300))),
        renaming_rule=doc.get("renaming_rule", DEFAULT_RENAMING_RULE),
        template_dir=doc.get("template_dir"),
    )


def load_provider_spec(source: str | Path) -> dict:
    """Read a capability -> binding mapping from a JSON file; the literal
    string "mock" means all-mock bindings."""
    if str(source) == "mock":
        return {}
    path = Path(source)
    if not path.is_file():
        raise ConfigInvalid(f"provider config not found: {source}")
    try:
        spec = json.loads(path.read_text())
    except ValueError as exc:
        raise ConfigInvalid(f"provider config is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise ConfigInvalid("provider config must be a JSON object")
    return spec
