"""Provider capability interfaces, deterministic mocks, remote adapters."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigInvalid
from .base import (
    ChatMessage,
    ChatProvider,
    Embedder,
    EmbeddingVector,
    FrameSequence,
    Image,
    ImageProvider,
    ImageRequest,
    ProviderPolicy,
    ProviderSet,
    RateLimit,
    SegmentationMask,
    Segmenter,
    VideoProvider,
    VideoRequest,
    stable_hash64,
)
from .mock import (
    MockChatProvider,
    MockEmbedder,
    MockImageProvider,
    MockSegmenter,
    MockVideoProvider,
)
from .remote import (
    RemoteCaller,
    RemoteChatProvider,
    RemoteEmbedder,
    RemoteImageProvider,
    RemoteSegmenter,
    RemoteVideoProvider,
)

__all__ = [
    "CallCounter",
    "ChatMessage",
    "ChatProvider",
    "Embedder",
    "EmbeddingVector",
    "FrameSequence",
    "Image",
    "ImageProvider",
    "ImageRequest",
    "MockChatProvider",
    "MockEmbedder",
    "MockImageProvider",
    "MockSegmenter",
    "MockVideoProvider",
    "ProviderPolicy",
    "ProviderSet",
    "RateLimit",
    "RemoteCaller",
    "SegmentationMask",
    "Segmenter",
    "VideoProvider",
    "VideoRequest",
    "counting_provider_set",
    "mock_provider_set",
    "provider_set_from_spec",
    "stable_hash64",
]


def mock_provider_set(
    seed: int = 0,
    scene_count: int = 3,
    image_resolution: int = 512,
    fps: float = 8.0,
) -> ProviderSet:
    return ProviderSet(
        chat=MockChatProvider(seed=seed, scene_count=scene_count),
        image=MockImageProvider(resolution=image_resolution),
        video=MockVideoProvider(fps=fps),
        segmenter=MockSegmenter(),
        embedder=MockEmbedder(),
    )


_CAPABILITIES = ("chat", "image", "video", "segmenter", "embedder")


def provider_set_from_spec(
    spec: dict,
    seed: int = 0,
    scene_count: int = 3,
    image_resolution: int = 512,
    fps: float = 8.0,
    policy: ProviderPolicy | None = None,
) -> ProviderSet:
    """Build a provider set from a configuration mapping:
    capability -> {"kind": "mock"} or {"kind": "remote", "endpoint": url,
    "credential_env": name}. Missing capabilities default to mock."""
    mocks = mock_provider_set(
        seed=seed, scene_count=scene_count,
        image_resolution=image_resolution, fps=fps,
    )
    built = {}
    for capability in _CAPABILITIES:
        entry = spec.get(capability, {"kind": "mock"})
        kind = entry.get("kind", "mock")
        if kind == "mock":
            built[capability] = getattr(mocks, capability)
            continue
        if kind != "remote":
            raise ConfigInvalid(f"unknown provider kind {kind!r} for {capability}")
        endpoint = entry.get("endpoint")
        if not endpoint:
            raise ConfigInvalid(f"remote provider {capability} needs an endpoint")
        caller = RemoteCaller(
            endpoint,
            policy=policy,
            credential_env=entry.get("credential_env"),
        )
        built[capability] = {
            "chat": RemoteChatProvider,
            "image": RemoteImageProvider,
            "video": RemoteVideoProvider,
            "segmenter": RemoteSegmenter,
            "embedder": RemoteEmbedder,
        }[capability](caller)
    return ProviderSet(**built)


@dataclass
class CallCounter:
    """Per-capability call tally, attached by counting_provider_set."""

    counts: dict[str, int] = field(default_factory=dict)

    def bump(self, capability: str):
        self.counts[capability] = self.counts.get(capability, 0) + 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())


class _CountingProxy:
    def __init__(self, inner, capability: str, methods: tuple[str, ...], counter: CallCounter):
        self._inner = inner
        self._capability = capability
        self._methods = set(methods)
        self._counter = counter

    def __getattr__(self, name):
        attr = getattr(self._inner, name)
        if name in self._methods:
            def wrapped(*args, **kwargs):
                self._counter.bump(self._capability)
                return attr(*args, **kwargs)

            return wrapped
        return attr


def counting_provider_set(providers: ProviderSet, counter: CallCounter) -> ProviderSet:
    return ProviderSet(
        chat=_CountingProxy(providers.chat, "chat", ("chat",), counter),
        image=_CountingProxy(
            providers.image, "image", ("generate_images", "region_replace"), counter
        ),
        video=_CountingProxy(providers.video, "video", ("generate_videos",), counter),
        segmenter=_CountingProxy(providers.segmenter, "segment", ("segment",), counter),
        embedder=_CountingProxy(
            providers.embedder, "embed",
            ("embed_text", "embed_image", "embed_image_region"), counter,
        ),
    )
