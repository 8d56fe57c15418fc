"""Evaluation battery for curation and reporting.

Formulas pinned here:
  - distortion/blur: population variance v of the 8-neighbour 3x3
    Laplacian over interior grayscale pixels, squashed to v/(v+1000).
    Computed from exact integer moments, so constant images score 0.0
    exactly and both kernel backends agree bit for bit.
  - subject/background consistency: mean over t>=1 of
    (cos(f_t, f_0) + cos(f_t, f_{t-1})) / 2, mapped from [-1,1] to [0,1],
    where f_t is the embedding of frame t restricted to the anchor mask
    from frame 0.
  - coherence: arithmetic mean of subject and background consistency.
  - text-visual alignment: mean cosine between the text embedding and
    each frame embedding (a stand-in formula; reports are flagged with
    alignment_method so downstream consumers know which one they got).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .errors import ClipTooShort, ImageTooSmall, NoSubjectFound
from .providers.base import Embedder, FrameSequence, Image, SegmentationMask, Segmenter
from .providers.media import tile_row

BLUR_SQUASH_C = 1000.0
ALIGNMENT_METHOD = "frame-mean-cosine"
BACKGROUND_LABEL = "background"


@dataclass(frozen=True)
class MetricReport:
    distortion_quality: float
    subject_consistency: float
    background_consistency: float
    coherence: float
    text_visual_alignment: float
    image_image_similarity: float | None = None

    def __post_init__(self):
        expected = coherence(self.subject_consistency, self.background_consistency)
        if self.coherence != expected:
            raise ValueError("coherence must equal (subject + background) / 2")

    def to_dict(self) -> dict:
        return {
            "distortion_quality": self.distortion_quality,
            "subject_consistency": self.subject_consistency,
            "background_consistency": self.background_consistency,
            "coherence": self.coherence,
            "text_visual_alignment": self.text_visual_alignment,
            "image_image_similarity": self.image_image_similarity,
            "alignment_method": ALIGNMENT_METHOD,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricReport":
        return cls(
            distortion_quality=doc["distortion_quality"],
            subject_consistency=doc["subject_consistency"],
            background_consistency=doc["background_consistency"],
            coherence=doc["coherence"],
            text_visual_alignment=doc["text_visual_alignment"],
            image_image_similarity=doc.get("image_image_similarity"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class ContactSheet:
    image: Image
    k: int
    source_frame_indices: tuple[int, ...]


def blur_score(image: Image) -> float:
    """Sharpness proxy in [0,1]; 0 for constant images."""
    n, s, ss = kernels.laplacian_moments(kernels.gray_u8(np.asarray(image.pixels)))
    if n == 0:
        raise ImageTooSmall(f"{image.width}x{image.height} is below 3x3")
    variance = float(n * ss - s * s) / float(n * n)
    return variance / (variance + BLUR_SQUASH_C)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(u @ u)
    nv = float(v @ v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v) / (np.sqrt(nu) * np.sqrt(nv))


def _anchored_consistency(clip: FrameSequence, embedder: Embedder, bitmap: np.ndarray) -> float:
    if clip.frame_count < 2:
        raise ClipTooShort("consistency needs at least 2 frames")
    embeds = [embedder.embed_image_region(f, bitmap).values for f in clip.frames]
    terms = [
        0.5 * (cosine(embeds[t], embeds[0]) + cosine(embeds[t], embeds[t - 1]))
        for t in range(1, len(embeds))
    ]
    raw = sum(terms) / len(terms)
    return (raw + 1.0) / 2.0


def _frame0_masks(clip: FrameSequence, segmenter: Segmenter | None) -> list[SegmentationMask]:
    if segmenter is None:
        from .providers.mock import MockSegmenter

        segmenter = MockSegmenter()
    return segmenter.segment(clip.frames[0])


def subject_consistency(
    clip: FrameSequence,
    embedder: Embedder,
    subject_mask: SegmentationMask | None = None,
    segmenter: Segmenter | None = None,
) -> float:
    """Temporal stability of the subject region, in [0,1]. Without an
    explicit mask, uses the largest non-background region of frame 0."""
    if subject_mask is None:
        candidates = [
            m for m in _frame0_masks(clip, segmenter) if m.label != BACKGROUND_LABEL
        ]
        if not candidates:
            raise NoSubjectFound("segmentation produced only background")
        subject_mask = max(candidates, key=lambda m: m.area)
    return _anchored_consistency(clip, embedder, subject_mask.bitmap)


def background_consistency(
    clip: FrameSequence,
    embedder: Embedder,
    segmenter: Segmenter | None = None,
) -> float:
    """Temporal stability of the frame-0 background region, in [0,1]."""
    masks = _frame0_masks(clip, segmenter)
    background = next((m for m in masks if m.label == BACKGROUND_LABEL), None)
    if background is None:
        raise NoSubjectFound("segmentation produced no background mask")
    return _anchored_consistency(clip, embedder, background.bitmap)


def coherence(subject: float, background: float) -> float:
    return (subject + background) / 2


def text_visual_alignment(text: str, frames: list[Image], embedder: Embedder) -> float:
    if not frames:
        raise ClipTooShort("alignment needs at least 1 frame")
    tv = embedder.embed_text(text).values
    sims = [cosine(tv, embedder.embed_image(f).values) for f in frames]
    return sum(sims) / len(sims)


def image_image_similarity(a: Image, b: Image, embedder: Embedder) -> float:
    return cosine(embedder.embed_image(a).values, embedder.embed_image(b).values)


def contact_sheet_indices(frame_count: int, k: int) -> tuple[int, ...]:
    """Evenly spaced indices, round-half-up: floor(i*(n-1)/(k-1) + 1/2)."""
    n = frame_count
    return tuple((2 * i * (n - 1) + (k - 1)) // (2 * (k - 1)) for i in range(k))


def contact_sheet(clip: FrameSequence, k: int = 5) -> ContactSheet:
    """One-row composite of k evenly spaced frames (first and last always
    included)."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if clip.frame_count < k:
        raise ClipTooShort(f"clip has {clip.frame_count} frames, need >= {k}")
    indices = contact_sheet_indices(clip.frame_count, k)
    image = tile_row([clip.frames[i] for i in indices])
    return ContactSheet(image=image, k=k, source_frame_indices=indices)


def clip_report(
    clip: FrameSequence,
    description: str,
    embedder: Embedder,
    segmenter: Segmenter | None = None,
) -> MetricReport:
    """The full per-clip battery used for ranking and reporting."""
    blur = sum(blur_score(f) for f in clip.frames) / clip.frame_count
    subject = subject_consistency(clip, embedder, segmenter=segmenter)
    background = background_consistency(clip, embedder, segmenter=segmenter)
    alignment = text_visual_alignment(description, list(clip.frames), embedder)
    return MetricReport(
        distortion_quality=blur,
        subject_consistency=subject,
        background_consistency=background,
        coherence=coherence(subject, background),
        text_visual_alignment=alignment,
    )


def composite_score(report: MetricReport, weights: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> float:
    """Ranking score: weighted mean of distortion quality and the two
    consistency scores (equal weights by default)."""
    total = (
        weights[0] * report.distortion_quality
        + weights[1] * report.subject_consistency
        + weights[2] * report.background_consistency
    )
    return total / sum(weights)
