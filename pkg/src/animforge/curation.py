"""Candidate-pool management: metric ranking with top-k filtering, chat
judging of images and contact sheets, and the bounded consistency-repair
loop (judge -> segment -> region replace -> re-judge)."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Generic, Sequence, TypeVar

import numpy as np

from . import _kernels as kernels
from .errors import IndexOutOfRange, JudgeFailed, NoVerdictFound, ScoresMissing
from .metrics import BACKGROUND_LABEL, ContactSheet, MetricReport, composite_score
from .prompts import (
    PromptLibrary,
    TemplateId,
    parse_judge_verdict,
    parse_repair_verdict,
    render,
)
from .providers.base import (
    ChatMessage,
    ChatProvider,
    Image,
    ImageProvider,
    ImageRequest,
    SegmentationMask,
    Segmenter,
)
from .providers.mock import HUE_BINS
from .script import CharacterProfile

T = TypeVar("T")

JUDGE_FORMAT_REMINDER = (
    "\n\nReminder: reply using the exact format 'The answer is image x'."
)

# The bundled templates cover selection judging only; the consistency check
# uses this fixed ask, paired with parse_repair_verdict's sentinel.
CONSISTENCY_CHECK_PROMPT = (
    "The first image is the generated scene. The following images are "
    "character references, in order: {names}. Check the character "
    "consistency between the scene and each reference. If every "
    "character's appearance matches its reference, respond with "
    "'No problem found.' If not, name the inconsistent character and "
    "briefly explain."
)


@dataclass(frozen=True)
class CandidatePool(Generic[T]):
    items: tuple[T, ...]
    scores: tuple[MetricReport, ...] | None = None
    selected: int | None = None
    provenance: str = ""

    def __post_init__(self):
        if self.scores is not None and len(self.scores) != len(self.items):
            raise ValueError("one score per item required")
        if self.selected is not None and not 0 <= self.selected < len(self.items):
            raise ValueError("selected index out of range")

    def with_scores(self, scores: Sequence[MetricReport]) -> "CandidatePool[T]":
        return replace(self, scores=tuple(scores))

    def with_selected(self, index: int) -> "CandidatePool[T]":
        return replace(self, selected=index)


@dataclass(frozen=True)
class ReflectionOutcome:
    iterations_used: int
    passed: bool
    final_item: Image
    audit_log: tuple[dict, ...] = field(default=())


def rank_candidates(pool: CandidatePool, k: int) -> list[int]:
    """Indices of the k highest composite scores, descending; ties broken
    by lower index."""
    if pool.scores is None:
        raise ScoresMissing("pool has no scores")
    composites = [composite_score(r) for r in pool.scores]
    order = sorted(range(len(composites)), key=lambda i: (-composites[i], i))
    return order[: min(k, len(order))]


def _ask_judge(
    template_id: TemplateId,
    description: str,
    images: Sequence[Image],
    chat_provider: ChatProvider,
    library: PromptLibrary,
) -> int:
    """Render the judge template, attach candidates, parse the verdict.
    One re-ask with a format reminder, then JudgeFailed."""
    template = library.get(template_id)
    rendered = render(
        template, {"Description": description, "PoolSize": str(len(images))}
    )
    prompt = rendered
    last_error: Exception | None = None
    for _ in range(2):
        reply = chat_provider.chat(
            [ChatMessage(role="user", text=prompt, attached_images=tuple(images))]
        )
        try:
            verdict = parse_judge_verdict(reply, pool_size=len(images))
            return verdict.chosen_index - 1
        except (NoVerdictFound, IndexOutOfRange) as exc:
            last_error = exc
            prompt = rendered + JUDGE_FORMAT_REMINDER
    raise JudgeFailed(f"judge failed twice: {last_error}")


def judge_select_image(
    pool: CandidatePool[Image],
    scene_description: str,
    chat_provider: ChatProvider,
    library: PromptLibrary | None = None,
) -> int:
    if not pool.items:
        raise ValueError("empty pool")
    if len(pool.items) == 1:
        return 0
    return _ask_judge(
        TemplateId.IMAGE_JUDGE, scene_description, pool.items,
        chat_provider, library or PromptLibrary(),
    )


def judge_select_video(
    top: Sequence[ContactSheet],
    scene_description: str,
    chat_provider: ChatProvider,
    library: PromptLibrary | None = None,
) -> int:
    if not 1 <= len(top) <= 3:
        raise ValueError("judge takes between 1 and 3 contact sheets")
    if len(top) == 1:
        return 0
    return _ask_judge(
        TemplateId.VIDEO_JUDGE, scene_description, [sheet.image for sheet in top],
        chat_provider, library or PromptLibrary(),
    )


def _dominant_bin(image: Image) -> int | None:
    classes = kernels.class_grid(np.asarray(image.pixels))
    chromatic = classes[classes < HUE_BINS]
    if chromatic.size == 0:
        return None
    return int(np.bincount(chromatic).argmax())


def _bin_counts(image: Image) -> np.ndarray:
    classes = kernels.class_grid(np.asarray(image.pixels))
    return np.bincount(classes.ravel(), minlength=HUE_BINS)


def _pick_failing_region(
    scene: Image,
    masks: list[SegmentationMask],
    expected_bins: set[int],
) -> SegmentationMask | None:
    """Largest non-background region whose dominant hue matches no
    expected character; falls back to the largest non-background region."""
    non_background = [m for m in masks if m.label != BACKGROUND_LABEL]
    if not non_background:
        return None
    classes = kernels.class_grid(np.asarray(scene.pixels))
    mismatched = []
    for mask in non_background:
        region = classes[mask.bitmap]
        chromatic = region[region < HUE_BINS]
        if chromatic.size == 0:
            mismatched.append(mask)
            continue
        if int(np.bincount(chromatic).argmax()) not in expected_bins:
            mismatched.append(mask)
    pool = mismatched or non_background
    return max(pool, key=lambda m: m.area)


def consistency_repair(
    scene_image: Image,
    expected_characters: Sequence[tuple[CharacterProfile, Image]],
    segmenter: Segmenter,
    image_provider: ImageProvider,
    chat_provider: ChatProvider,
    max_iters: int = 3,
    seed: int = 0,
) -> ReflectionOutcome:
    """Bounded judge/replace loop against the character reference images.

    Each iteration asks the chat judge to compare the scene with every
    reference; on failure it repaints one region via region_replace and
    re-enters the judge. Stops on a pass or when the budget is exhausted
    (passed=False with the best-so-far image).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    names = [profile.name for profile, _ in expected_characters]
    references = [image for _, image in expected_characters]
    ask = CONSISTENCY_CHECK_PROMPT.format(names="; ".join(names) or "none")
    expected_bins = {
        b for b in (_dominant_bin(ref) for ref in references) if b is not None
    }

    current = scene_image
    audit: list[dict] = []
    for iteration in range(1, max_iters + 1):
        reply = chat_provider.chat(
            [ChatMessage(role="user", text=ask,
                         attached_images=(current, *references))]
        )
        audit.append({"action": "judge", "verdict": reply})
        if parse_repair_verdict(reply).no_problem:
            return ReflectionOutcome(
                iterations_used=iteration, passed=True,
                final_item=current, audit_log=tuple(audit),
            )
        if iteration == max_iters:
            break

        failing = next(
            ((p, img) for (p, img) in expected_characters if p.name in reply), None
        )
        if failing is None and expected_characters:
            # judge named nobody: repair the character least present in the scene
            counts = _bin_counts(current)
            def presence(pair):
                b = _dominant_bin(pair[1])
                return counts[b] if b is not None else np.iinfo(np.int64).max
            failing = min(expected_characters, key=presence)
        if failing is None:
            continue

        profile, _ = failing
        target = _pick_failing_region(current, segmenter.segment(current), expected_bins)
        if target is None:
            continue
        request = ImageRequest(
            prompt=f"{profile.name}: {profile.description} | cast: {profile.name}",
            seed=seed,
        )
        current = image_provider.region_replace(current, target, request)
        audit.append(
            {"action": "replace", "character": profile.name,
             "region": target.label, "area": target.area}
        )

    return ReflectionOutcome(
        iterations_used=max_iters, passed=False,
        final_item=current, audit_log=tuple(audit),
    )
