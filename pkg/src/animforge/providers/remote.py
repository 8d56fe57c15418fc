"""JSON-over-HTTP adapters for the five capabilities.

Adapters transport bytes and map HTTP status classes to error kinds —
they never interpret payload semantics:

    2xx           -> parsed JSON body
    429           -> RateLimitedError (retried, honouring Retry-After)
    other 4xx     -> PermanentProviderError
    5xx / network -> TransientProviderError (retried per policy)

Wire schema per capability (POST, JSON body; binary payloads base64):
    /chat                {messages:[{role,text,images:[b64png]}]}  -> {reply}
    /images              {prompt,reference_images:[{b64}|{url}],seed,n} -> {images:[b64png]}
    /region_replace      {image,mask,prompt,seed}                  -> {image}
    /videos              {image,prompt,params,seed,n,frame_count}  -> {clips:[{fps,frames:[b64png]}]}
    /segment             {image}                                   -> {masks:[{label,bitmap}]}
    /embed_text          {text}                                    -> {values:[...]}
    /embed_image         {image}                                   -> {values:[...]}
    /embed_image_region  {image,mask}                              -> {values:[...]}

Credentials come from the environment variable named per provider and are
sent as a bearer token.
"""
from __future__ import annotations

import base64
import json
import os
import time
from collections import deque
from typing import Callable, Sequence

import numpy as np

from ..errors import (
    PermanentProviderError,
    RateLimitedError,
    TransientProviderError,
)
from ..prompts import serialize_params
from . import media
from .base import (
    ChatMessage,
    EmbeddingVector,
    FrameSequence,
    Image,
    ImageRequest,
    ProviderPolicy,
    SegmentationMask,
    VideoRequest,
)

# transport: (url, payload, headers, timeout) -> (status, body bytes)
Transport = Callable[[str, dict, dict, float], tuple[int, bytes]]


def requests_transport(url: str, payload: dict, headers: dict, timeout: float):
    import requests

    try:
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    except requests.exceptions.RequestException as exc:
        raise TransientProviderError(f"network error: {exc}") from exc
    return resp.status_code, resp.content


class RateLimiter:
    """Serializes admission to at most max_requests per sliding window."""

    def __init__(self, max_requests: int, window_seconds: float,
                 sleep=time.sleep, clock=time.monotonic):
        self.max_requests = max_requests
        self.window = window_seconds
        self._sleep = sleep
        self._clock = clock
        self._admissions: deque[float] = deque()

    def acquire(self):
        now = self._clock()
        while self._admissions and now - self._admissions[0] >= self.window:
            self._admissions.popleft()
        if len(self._admissions) >= self.max_requests:
            wait = self.window - (now - self._admissions[0])
            if wait > 0:
                self._sleep(wait)
            self._admissions.popleft()
        self._admissions.append(self._clock())


class RemoteCaller:
    """Retry/backoff/rate-limit wrapper around one endpoint base URL."""

    def __init__(
        self,
        base_url: str,
        policy: ProviderPolicy | None = None,
        credential_env: str | None = None,
        transport: Transport | None = None,
        sleep=time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.policy = policy or ProviderPolicy()
        self.credential_env = credential_env
        self.transport = transport or requests_transport
        self._sleep = sleep
        self._limiter = None
        if self.policy.rate_limit is not None:
            self._limiter = RateLimiter(
                self.policy.rate_limit.max_requests,
                self.policy.rate_limit.window_seconds,
                sleep=sleep,
            )

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.credential_env:
            token = os.environ.get(self.credential_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def call(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}/{path.lstrip('/')}"
        attempts = 1 + self.policy.max_retries
        last_error: Exception | None = None
        for attempt in range(attempts):
            if self._limiter is not None:
                self._limiter.acquire()
            try:
                status, body = self.transport(url, payload, self._headers(), self.policy.timeout)
            except TransientProviderError as exc:
                last_error = exc
                self._backoff(attempt, attempts)
                continue
            if 200 <= status < 300:
                try:
                    return json.loads(body.decode("utf-8"))
                except (ValueError, UnicodeDecodeError) as exc:
                    raise PermanentProviderError(f"unparseable response body: {exc}") from exc
            if status == 429:
                last_error = RateLimitedError(f"429 from {url}")
                self._backoff(attempt, attempts)
                continue
            if 400 <= status < 500:
                raise PermanentProviderError(f"HTTP {status} from {url}")
            last_error = TransientProviderError(f"HTTP {status} from {url}")
            self._backoff(attempt, attempts)
        raise last_error if last_error is not None else TransientProviderError("no attempts made")

    def _backoff(self, attempt: int, attempts: int):
        if attempt + 1 < attempts:
            self._sleep(self.policy.backoff_base * (2 ** attempt))


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


def _image_b64(image: Image) -> str:
    return _b64(media.png_bytes(image))


def _image_from_b64(text: str) -> Image:
    return media.image_from_png(_unb64(text))


class RemoteChatProvider:
    def __init__(self, caller: RemoteCaller):
        self.caller = caller

    def chat(self, messages: Sequence[ChatMessage]) -> str:
        payload = {
            "messages": [
                {
                    "role": m.role,
                    "text": m.text,
                    "images": [_image_b64(img) for img in m.attached_images],
                }
                for m in messages
            ]
        }
        reply = self.caller.call("chat", payload).get("reply", "")
        if not reply:
            raise PermanentProviderError("empty chat reply")
        return reply


class RemoteImageProvider:
    def __init__(self, caller: RemoteCaller):
        self.caller = caller

    def generate_images(self, request: ImageRequest, n: int) -> list[Image]:
        payload = {
            "prompt": request.prompt,
            "reference_images": [{"b64": _image_b64(im)} for im in request.reference_images],
            "seed": request.seed,
            "n": n,
        }
        body = self.caller.call("images", payload)
        images = [_image_from_b64(item) for item in body.get("images", [])]
        if len(images) != n:
            raise PermanentProviderError(f"expected {n} images, got {len(images)}")
        return images

    def region_replace(self, image: Image, mask: SegmentationMask, request: ImageRequest) -> Image:
        payload = {
            "image": _image_b64(image),
            "mask": _b64(media.mask_png_bytes(mask.bitmap)),
            "prompt": request.prompt,
            "seed": request.seed,
        }
        return _image_from_b64(self.caller.call("region_replace", payload)["image"])


class RemoteVideoProvider:
    def __init__(self, caller: RemoteCaller):
        self.caller = caller

    def generate_videos(self, request: VideoRequest, n: int) -> list[FrameSequence]:
        payload = {
            "image": _image_b64(request.conditioning_image),
            "prompt": request.prompt,
            "params": json.loads(serialize_params(request.params)),
            "seed": request.seed,
            "n": n,
            "frame_count": request.frame_count,
        }
        body = self.caller.call("videos", payload)
        clips = []
        for item in body.get("clips", []):
            frames = tuple(_image_from_b64(f) for f in item["frames"])
            clips.append(FrameSequence(frames=frames, fps=float(item.get("fps", 8.0))))
        if len(clips) != n:
            raise PermanentProviderError(f"expected {n} clips, got {len(clips)}")
        return clips


class RemoteSegmenter:
    def __init__(self, caller: RemoteCaller):
        self.caller = caller

    def segment(self, image: Image) -> list[SegmentationMask]:
        body = self.caller.call("segment", {"image": _image_b64(image)})
        return [
            SegmentationMask.from_bitmap(item["label"], media.mask_from_png(_unb64(item["bitmap"])))
            for item in body.get("masks", [])
        ]


class RemoteEmbedder:
    def __init__(self, caller: RemoteCaller, dimension: int = 512):
        self.caller = caller
        self.dimension = dimension

    def _vector(self, body: dict) -> EmbeddingVector:
        values = np.asarray(body["values"], dtype=np.float64)
        return EmbeddingVector(values=values, dimension=values.shape[0])

    def embed_text(self, text: str) -> EmbeddingVector:
        return self._vector(self.caller.call("embed_text", {"text": text}))

    def embed_image(self, image: Image) -> EmbeddingVector:
        return self._vector(self.caller.call("embed_image", {"image": _image_b64(image)}))

    def embed_image_region(self, image: Image, bitmap: np.ndarray) -> EmbeddingVector:
        payload = {
            "image": _image_b64(image),
            "mask": _b64(media.mask_png_bytes(bitmap)),
        }
        return self._vector(self.caller.call("embed_image_region", payload))
