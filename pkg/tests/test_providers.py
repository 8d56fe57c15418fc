"""Mock determinism and content model; retry/backoff/rate-limit machinery;
remote adapter wire handling via fake transports."""
import base64
import json

import numpy as np
import pytest

from animforge.errors import (
    PermanentProviderError,
    RateLimitedError,
    TransientProviderError,
)
from animforge.prompts import GenerationParams
from animforge.providers import (
    ChatMessage,
    ImageRequest,
    ProviderPolicy,
    VideoRequest,
)
from animforge.providers.base import Image, stable_hash64
from animforge.providers.media import (
    image_from_png,
    mask_png_bytes,
    png_bytes,
    read_clip,
    resize_nearest,
    write_clip,
)
from animforge.providers.mock import (
    MockChatProvider,
    MockEmbedder,
    MockImageProvider,
    MockSegmenter,
    MockVideoProvider,
    hue_bin,
    name_hue_degrees,
)
from animforge.providers.remote import (
    RateLimiter,
    RemoteCaller,
    RemoteChatProvider,
    RemoteImageProvider,
    RemoteSegmenter,
)

from conftest import flat_image


def dominant_hue_bin(image: Image) -> int:
    from animforge import _kernels as kernels

    classes = kernels.class_grid(np.asarray(image.pixels))
    chromatic = classes[classes < 48]
    return int(np.bincount(chromatic).argmax())


def zero_motion_params() -> GenerationParams:
    return GenerationParams(description="still", motion=0, guidance_scale=10.0)


def motion_params(motion: int) -> GenerationParams:
    return GenerationParams(description="move", motion=motion, guidance_scale=10.0)


class TestMockChat:
    def test_seeded_determinism(self):
        messages = [ChatMessage(role="user", text="hello there")]
        a = MockChatProvider(seed=5).chat(messages)
        b = MockChatProvider(seed=5).chat(messages)
        assert a == b

    def test_judge_hash_oracle(self):
        """k = 1 + (hash of concatenated digests) mod n, recomputed here."""
        gen = MockImageProvider(resolution=32)
        pool = gen.generate_images(ImageRequest(prompt="cast: Tom the cat |", seed=3), 4)
        reply = MockChatProvider().chat(
            [ChatMessage(role="user",
                         text="These images, numbered from 1 to 4, choose.",
                         attached_images=tuple(pool))]
        )
        payload = "".join(img.content_hash for img in pool)
        expected = 1 + stable_hash64(payload) % 4
        assert f"The answer is image {expected}" in reply

    def test_refine_is_long_and_keeps_names(self):
        prompt = (
            "Ensure that the provided story Mia and Rex the fox met by the river. "
            "is approximately 150 words and rich in plot details."
        )
        reply = MockChatProvider(seed=1).chat([ChatMessage(role="user", text=prompt)])
        assert 120 <= len(reply.split()) <= 200
        assert "Mia" in reply and "Rex the fox" in reply

    def test_non_empty_for_arbitrary_text(self):
        assert MockChatProvider().chat([ChatMessage(role="user", text="??")])


class TestMockImages:
    def test_pool_size_and_determinism(self):
        gen = MockImageProvider(resolution=32)
        request = ImageRequest(prompt="cast: Max the dog |", seed=9)
        a = gen.generate_images(request, 4)
        b = gen.generate_images(request, 4)
        assert len(a) == 4
        assert [i.content_hash for i in a] == [i.content_hash for i in b]
        assert len({i.content_hash for i in a}) == 4  # candidates differ

    def test_hue_hash_oracle(self):
        """Dominant hue bin equals the bin of hash(name) mod 360 degrees."""
        gen = MockImageProvider(resolution=48)
        for name in ("Max the dog", "Tom the cat", "Ruby the fox"):
            image = gen.generate_images(ImageRequest(prompt=f"{name} runs", seed=1), 1)[0]
            assert dominant_hue_bin(image) == hue_bin(name_hue_degrees(name))

    def test_blank_prompt_permanent(self):
        gen = MockImageProvider(resolution=16)
        with pytest.raises(PermanentProviderError):
            gen.generate_images(ImageRequest(prompt="   ", seed=0), 1)

    def test_scene_composition(self):
        gen = MockImageProvider(resolution=64)
        image = gen.generate_images(
            ImageRequest(prompt="play | cast: Tom the cat, Max the dog | setting: Garden",
                         seed=2), 1
        )[0]
        assert dominant_hue_bin(image) == hue_bin(name_hue_degrees("Garden"))
        from animforge import _kernels as kernels

        classes_present = set(np.unique(kernels.class_grid(np.asarray(image.pixels))).tolist())
        assert hue_bin(name_hue_degrees("Tom the cat")) in classes_present
        assert hue_bin(name_hue_degrees("Max the dog")) in classes_present


class TestRegionReplace:
    def test_outside_mask_unchanged_inside_recoloured(self):
        gen = MockImageProvider(resolution=32)
        segmenter = MockSegmenter()
        scene = gen.generate_images(
            ImageRequest(prompt="x | cast: Tom the cat | setting: Garden", seed=4), 1
        )[0]
        masks = [m for m in segmenter.segment(scene) if m.label != "background"]
        target = max(masks, key=lambda m: m.area)
        request = ImageRequest(prompt="cast: Ruby the fox |", seed=5)
        out = gen.region_replace(scene, target, request)

        outside = ~target.bitmap
        assert np.array_equal(
            np.asarray(out.pixels)[outside], np.asarray(scene.pixels)[outside]
        )
        region = np.asarray(out.pixels)[target.bitmap]
        region_img = Image.from_array(region.reshape(1, -1, 3))
        assert dominant_hue_bin(region_img) == hue_bin(name_hue_degrees("Ruby the fox"))

    def test_blank_prompt_permanent(self):
        gen = MockImageProvider(resolution=16)
        scene = flat_image(16, 16)
        mask_bitmap = np.zeros((16, 16), dtype=bool)
        mask_bitmap[:4, :4] = True
        from animforge.providers.base import SegmentationMask

        mask = SegmentationMask.from_bitmap("region_01", mask_bitmap)
        with pytest.raises(PermanentProviderError):
            gen.region_replace(scene, mask, ImageRequest(prompt=" ", seed=0))


class TestMockVideos:
    def test_pool_and_frame_count(self):
        gen = MockVideoProvider()
        base = flat_image(24, 24, (200, 40, 40))
        clips = gen.generate_videos(
            VideoRequest(conditioning_image=base, prompt="p",
                         params=motion_params(2), seed=1, frame_count=8),
            3,
        )
        assert len(clips) == 3
        assert all(c.frame_count == 8 for c in clips)

    def test_motion_zero_freezes(self):
        gen = MockVideoProvider()
        base = flat_image(16, 16, (10, 200, 30))
        clip = gen.generate_videos(
            VideoRequest(conditioning_image=base, prompt="p",
                         params=zero_motion_params(), seed=1, frame_count=5),
            1,
        )[0]
        assert all(f.content_hash == base.content_hash for f in clip.frames)

    def test_frame_zero_equals_conditioning(self):
        gen = MockVideoProvider()
        rng = np.random.default_rng(8)
        base = Image.from_array(rng.integers(0, 255, (20, 20, 3), dtype=np.uint8))
        clip = gen.generate_videos(
            VideoRequest(conditioning_image=base, prompt="p",
                         params=motion_params(3), seed=1, frame_count=4),
            1,
        )[0]
        assert clip.frames[0].content_hash == base.content_hash

    def test_motion_increases_frame_deltas(self):
        """Delta oracle computed right here: mean per-pixel frame-to-frame
        absolute difference, on a structured scene-like image."""
        gen = MockVideoProvider()
        arr = np.zeros((32, 32, 3), dtype=np.uint8)
        arr[:] = (30, 90, 160)
        arr[8:24, 12:20] = (220, 60, 10)
        base = Image.from_array(arr)

        def mean_delta(motion):
            clip = gen.generate_videos(
                VideoRequest(conditioning_image=base, prompt="p",
                             params=motion_params(motion), seed=6, frame_count=6),
                1,
            )[0]
            deltas = []
            for a, b in zip(clip.frames, clip.frames[1:]):
                deltas.append(np.abs(
                    np.asarray(a.pixels).astype(int) - np.asarray(b.pixels).astype(int)
                ).mean())
            return float(np.mean(deltas))

        assert mean_delta(4) > mean_delta(1)

    def test_determinism(self):
        gen = MockVideoProvider()
        base = flat_image(16, 16, (5, 5, 250))
        request = VideoRequest(conditioning_image=base, prompt="p",
                               params=motion_params(2), seed=3, frame_count=4)
        a = gen.generate_videos(request, 2)
        b = gen.generate_videos(request, 2)
        assert [c.content_hash for c in a] == [c.content_hash for c in b]


class TestMockSegmenter:
    def test_partition_on_random_images(self):
        rng = np.random.default_rng(2)
        segmenter = MockSegmenter()
        for _ in range(5):
            img = Image.from_array(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
            masks = segmenter.segment(img)
            union = np.zeros((16, 16), dtype=int)
            for m in masks:
                union += m.bitmap.astype(int)
            assert (union == 1).all()  # disjoint and covering

    def test_half_and_half(self):
        arr = np.zeros((16, 16, 3), dtype=np.uint8)
        arr[:8] = (255, 0, 0)
        arr[8:] = (0, 0, 255)
        masks = MockSegmenter().segment(Image.from_array(arr))
        assert len(masks) == 2
        assert masks[0].area == masks[1].area == 128
        assert masks[0].label == "background"

    def test_constant_image_single_background(self):
        masks = MockSegmenter().segment(flat_image(12, 12))
        assert len(masks) == 1
        assert masks[0].label == "background"
        assert masks[0].area == 144


class TestMockEmbedder:
    def test_unit_norm(self):
        embedder = MockEmbedder()
        rng = np.random.default_rng(3)
        for _ in range(10):
            img = Image.from_array(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
            v = embedder.embed_image(img).values
            assert abs(float(v @ v) - 1.0) < 1e-9
        for text in ("red square", "a quiet meadow", "zzz"):
            v = embedder.embed_text(text).values
            assert abs(float(v @ v) - 1.0) < 1e-9

    def test_identical_images_identical_vectors(self):
        embedder = MockEmbedder()
        img = flat_image(16, 16, (200, 10, 10))
        a = embedder.embed_image(img).values
        b = embedder.embed_image(img).values
        assert np.array_equal(a, b)

    def test_one_pixel_flip_cosine(self):
        embedder = MockEmbedder()
        rng = np.random.default_rng(4)
        arr = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
        flipped = arr.copy()
        flipped[10, 10] = 255 - flipped[10, 10]
        a = embedder.embed_image(Image.from_array(arr)).values
        b = embedder.embed_image(Image.from_array(flipped)).values
        assert float(a @ b) > 0.99

    def test_blank_text_permanent(self):
        with pytest.raises(PermanentProviderError):
            MockEmbedder().embed_text("  ")


class FlakyTransport:
    """Fails with transient errors n times, then succeeds."""

    def __init__(self, failures: int, body: dict, status_sequence=None):
        self.failures = failures
        self.body = json.dumps(body).encode()
        self.calls = 0
        self.status_sequence = status_sequence

    def __call__(self, url, payload, headers, timeout):
        self.calls += 1
        if self.status_sequence is not None:
            status = self.status_sequence[
                min(self.calls - 1, len(self.status_sequence) - 1)
            ]
            return status, self.body if status == 200 else b"{}"
        if self.calls <= self.failures:
            raise TransientProviderError("boom")
        return 200, self.body


class TestRetryMachinery:
    def test_two_transients_then_success(self):
        transport = FlakyTransport(2, {"reply": "ok"})
        caller = RemoteCaller(
            "http://x", ProviderPolicy(max_retries=3, backoff_base=0.01),
            transport=transport, sleep=lambda s: None,
        )
        assert caller.call("chat", {})["reply"] == "ok"
        assert transport.calls == 3

    def test_attempt_budget(self):
        transport = FlakyTransport(99, {"reply": "ok"})
        caller = RemoteCaller(
            "http://x", ProviderPolicy(max_retries=2, backoff_base=0.01),
            transport=transport, sleep=lambda s: None,
        )
        with pytest.raises(TransientProviderError):
            caller.call("chat", {})
        assert transport.calls == 3  # 1 + max_retries

    def test_backoff_non_decreasing(self):
        delays = []
        transport = FlakyTransport(99, {})
        caller = RemoteCaller(
            "http://x", ProviderPolicy(max_retries=4, backoff_base=0.05),
            transport=transport, sleep=delays.append,
        )
        with pytest.raises(TransientProviderError):
            caller.call("chat", {})
        assert delays == sorted(delays)
        assert len(delays) == 4  # no sleep after the final attempt

    def test_4xx_is_permanent_no_retry(self):
        transport = FlakyTransport(0, {}, status_sequence=[404])
        caller = RemoteCaller("http://x", ProviderPolicy(max_retries=3),
                              transport=transport, sleep=lambda s: None)
        with pytest.raises(PermanentProviderError):
            caller.call("chat", {})
        assert transport.calls == 1

    def test_429_retried_then_success(self):
        transport = FlakyTransport(0, {"reply": "ok"}, status_sequence=[429, 429, 200])
        caller = RemoteCaller("http://x", ProviderPolicy(max_retries=3, backoff_base=0.01),
                              transport=transport, sleep=lambda s: None)
        assert caller.call("chat", {})["reply"] == "ok"
        assert transport.calls == 3

    def test_429_exhaustion_raises_rate_limited(self):
        transport = FlakyTransport(0, {}, status_sequence=[429])
        caller = RemoteCaller("http://x", ProviderPolicy(max_retries=1, backoff_base=0.01),
                              transport=transport, sleep=lambda s: None)
        with pytest.raises(RateLimitedError):
            caller.call("chat", {})

    def test_5xx_transient(self):
        transport = FlakyTransport(0, {"reply": "ok"}, status_sequence=[503, 200])
        caller = RemoteCaller("http://x", ProviderPolicy(max_retries=1, backoff_base=0.01),
                              transport=transport, sleep=lambda s: None)
        assert caller.call("chat", {})["reply"] == "ok"

    def test_rate_limiter_admission(self):
        clock = {"t": 0.0}
        sleeps = []

        def fake_sleep(s):
            sleeps.append(s)
            clock["t"] += s

        limiter = RateLimiter(2, window_seconds=1.0, sleep=fake_sleep,
                              clock=lambda: clock["t"])
        limiter.acquire()
        limiter.acquire()
        limiter.acquire()  # third within the window must wait
        assert sleeps and abs(sleeps[0] - 1.0) < 1e-9


def encoded_image(rgb=(10, 200, 30)) -> str:
    return base64.b64encode(png_bytes(flat_image(8, 8, rgb))).decode()


class TestRemoteAdapters:
    def test_chat_round_trip(self):
        transport = FlakyTransport(0, {"reply": "hello"})
        provider = RemoteChatProvider(RemoteCaller("http://x", transport=transport))
        reply = provider.chat([ChatMessage(role="user", text="hi",
                                           attached_images=(flat_image(4, 4),))])
        assert reply == "hello"

    def test_images_decoded(self):
        body = {"images": [encoded_image(), encoded_image((250, 0, 0))]}
        provider = RemoteImageProvider(
            RemoteCaller("http://x", transport=FlakyTransport(0, body))
        )
        images = provider.generate_images(ImageRequest(prompt="p", seed=0), 2)
        assert len(images) == 2
        assert images[0].width == 8

    def test_wrong_count_is_permanent(self):
        body = {"images": [encoded_image()]}
        provider = RemoteImageProvider(
            RemoteCaller("http://x", transport=FlakyTransport(0, body))
        )
        with pytest.raises(PermanentProviderError):
            provider.generate_images(ImageRequest(prompt="p", seed=0), 3)

    def test_segmenter_masks(self):
        bitmap = np.zeros((8, 8), dtype=bool)
        bitmap[:4] = True
        body = {"masks": [
            {"label": "background",
             "bitmap": base64.b64encode(mask_png_bytes(bitmap)).decode()},
        ]}
        provider = RemoteSegmenter(
            RemoteCaller("http://x", transport=FlakyTransport(0, body))
        )
        masks = provider.segment(flat_image(8, 8))
        assert masks[0].area == 32

    def test_credential_header(self, monkeypatch):
        captured = {}

        def transport(url, payload, headers, timeout):
            captured.update(headers)
            return 200, b'{"reply": "ok"}'

        monkeypatch.setenv("TEST_TOKEN_VAR", "sekrit")
        caller = RemoteCaller("http://x", credential_env="TEST_TOKEN_VAR",
                              transport=transport)
        caller.call("chat", {})
        assert captured["Authorization"] == "Bearer sekrit"


class TestMedia:
    def test_png_round_trip(self):
        rng = np.random.default_rng(5)
        img = Image.from_array(rng.integers(0, 256, (9, 7, 3), dtype=np.uint8))
        again = image_from_png(png_bytes(img))
        assert again.content_hash == img.content_hash

    def test_clip_dir_round_trip(self, tmp_path):
        from animforge.providers.base import FrameSequence

        frames = tuple(flat_image(6, 6, (i * 30, 0, 0)) for i in range(4))
        clip = FrameSequence(frames=frames, fps=8.0)
        write_clip(tmp_path / "clip", clip)
        again = read_clip(tmp_path / "clip")
        assert again.fps == 8.0
        assert [f.content_hash for f in again.frames] == [f.content_hash for f in frames]

    def test_resize_nearest_exact_factor(self):
        rng = np.random.default_rng(6)
        arr = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
        out = resize_nearest(Image.from_array(arr), 4, 4)
        assert out.width == out.height == 4
        assert np.array_equal(np.asarray(out.pixels), arr[::2, ::2])
