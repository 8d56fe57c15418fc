"""Carrier types and capability interfaces for the five generative
providers (chat, image, video, segmentation, embedding)."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from ..prompts import GenerationParams


def stable_hash64(*parts: object) -> int:
    """Process-stable 64-bit hash (Python's hash() is salted per run)."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            h.update(part)
        else:
            h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big")


@dataclass(frozen=True)
class Image:
    """8-bit RGB raster. pixels is a read-only (H, W, 3) uint8 array."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel buffer shape {self.pixels.shape} != {(self.height, self.width, 3)}"
            )
        if self.pixels.dtype != np.uint8:
            raise ValueError(f"pixel buffer must be uint8, got {self.pixels.dtype}")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Image":
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        arr.setflags(write=False)
        h, w = arr.shape[:2]
        return cls(width=w, height=h, pixels=arr)

    @property
    def content_hash(self) -> str:
        cached = self.__dict__.get("_content_hash")
        if cached is None:
            h = hashlib.sha256()
            h.update(f"{self.width}x{self.height}:".encode())
            h.update(np.ascontiguousarray(self.pixels).tobytes())
            cached = h.hexdigest()
            object.__setattr__(self, "_content_hash", cached)
        return cached


@dataclass(frozen=True)
class FrameSequence:
    """A clip at desk scale: ordered frames of uniform size plus fps."""

    frames: tuple[Image, ...]
    fps: float

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a clip needs at least one frame")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        w, h = self.frames[0].width, self.frames[0].height
        for f in self.frames:
            if (f.width, f.height) != (w, h):
                raise ValueError("frames must share dimensions")

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def content_hash(self) -> str:
        return stable_hash64(self.fps, *(f.content_hash for f in self.frames)).to_bytes(
            8, "big"
        ).hex()


@dataclass(frozen=True)
class ImageRequest:
    """prompt must be non-blank; providers reject violations as Permanent."""

    prompt: str
    reference_images: tuple[Image, ...] = ()
    seed: int = 0


@dataclass(frozen=True)
class VideoRequest:
    conditioning_image: Image
    prompt: str
    params: GenerationParams
    seed: int = 0
    frame_count: int = 24

    def __post_init__(self):
        if self.frame_count < 2:
            raise ValueError("frame_count must be >= 2")


@dataclass(frozen=True)
class SegmentationMask:
    label: str
    bitmap: np.ndarray  # bool (H, W)
    area: int

    def __post_init__(self):
        actual = int(self.bitmap.sum())
        if actual != self.area or self.area < 1:
            raise ValueError(f"mask area {self.area} != bitmap count {actual}")

    @classmethod
    def from_bitmap(cls, label: str, bitmap: np.ndarray) -> "SegmentationMask":
        bitmap = bitmap.astype(bool)
        bitmap.setflags(write=False)
        return cls(label=label, bitmap=bitmap, area=int(bitmap.sum()))


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray  # float64 (dimension,)
    dimension: int

    def __post_init__(self):
        if self.values.shape != (self.dimension,):
            raise ValueError("embedding length != dimension")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding has non-finite values")


@dataclass(frozen=True)
class RateLimit:
    max_requests: int
    window_seconds: float


@dataclass(frozen=True)
class ProviderPolicy:
    max_retries: int = 2
    backoff_base: float = 0.1
    rate_limit: RateLimit | None = None
    timeout: float = 30.0

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.backoff_base <= 0 or self.timeout <= 0:
            raise ValueError("durations must be positive")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str
    attached_images: tuple[Image, ...] = ()


@runtime_checkable
class ChatProvider(Protocol):
    def chat(self, messages: Sequence[ChatMessage]) -> str: ...


@runtime_checkable
class ImageProvider(Protocol):
    def generate_images(self, request: ImageRequest, n: int) -> list[Image]: ...

    def region_replace(
        self, image: Image, mask: SegmentationMask, request: ImageRequest
    ) -> Image: ...


@runtime_checkable
class VideoProvider(Protocol):
    def generate_videos(self, request: VideoRequest, n: int) -> list[FrameSequence]: ...


@runtime_checkable
class Segmenter(Protocol):
    def segment(self, image: Image) -> list[SegmentationMask]: ...


@runtime_checkable
class Embedder(Protocol):
    dimension: int

    def embed_text(self, text: str) -> EmbeddingVector: ...

    def embed_image(self, image: Image) -> EmbeddingVector: ...

    def embed_image_region(self, image: Image, bitmap: np.ndarray) -> EmbeddingVector: ...


@dataclass
class ProviderSet:
    """One concrete binding per capability."""

    chat: ChatProvider
    image: ImageProvider
    video: VideoProvider
    segmenter: Segmenter
    embedder: Embedder
