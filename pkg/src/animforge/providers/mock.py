"""Deterministic seeded reference providers.

These are the providers the test suite and desk-scale runs use. They are
stateless pure functions of (request, seed, ordinal) and encode identity
as colour so the metrics and the repair loop have real signal:

  - every character or setting name maps to a fixed hue,
    hash(name) mod 360, rendered at the centre of its 7.5-degree bin so
    segmentation recovers it exactly;
  - the image generator reads names from prompts via two conventions:
    an explicit "cast: A, B | setting: S" marker (emitted by the mock
    chat) and bare "Xxx the yyy" name patterns;
  - the chat provider answers each instruction family with a parseable,
    deterministic reply; judges pick candidate
    1 + (hash of concatenated attachment digests) mod n.

Overriding the bundled prompt templates breaks the mock chat's reply
heuristics; remote providers do not care.
"""
from __future__ import annotations

import re

import numpy as np

from .. import _kernels as kernels
from ..errors import PermanentProviderError
from ..prompts import NO_PROBLEM_SENTINEL
from ..script import (
    CharacterProfile,
    Placement,
    Script,
    SettingProfile,
    parse_script,
    serialize_script,
    validate_script,
)
from .base import (
    EmbeddingVector,
    FrameSequence,
    Image,
    ImageRequest,
    SegmentationMask,
    VideoRequest,
    stable_hash64,
)

HUE_BINS = 48
BIN_DEGREES = 360.0 / HUE_BINS

NAME_PATTERN = re.compile(r"\b([A-Z][a-z]+ the [a-z]+)\b")
CAST_MARKER = re.compile(r"cast:\s*([^|\n]+)", re.IGNORECASE)
SETTING_MARKER = re.compile(r"setting:\s*([^|\n.,;]+)", re.IGNORECASE)

NAME_BANK = ("Tom", "Max", "Lily", "Sam", "Mia", "Ben", "Ruby", "Leo")
NOUN_PATTERN = re.compile(
    r"\b(?:a|an|the)\s+(cat|dog|bird|rabbit|fox|bear|mouse|boy|girl|man|woman|"
    r"robot|dragon|knight|wizard|turtle|pony)\b",
    re.IGNORECASE,
)

SETTING_TABLE = (
    ("garden", ("Garden", "Outdoor", "a sunlit lawn with flower beds and an old oak tree")),
    ("kitchen", ("Kitchen", "Indoor", "a warm kitchen with a wooden table and copper pots")),
    ("house", ("House", "Indoor", "a cosy living room with a soft rug and wide windows")),
    ("forest", ("Forest", "Outdoor", "tall green trees with a winding dirt path")),
    ("beach", ("Beach", "Outdoor", "pale sand, gentle waves and a clear horizon")),
    ("park", ("Park", "Outdoor", "an open park with benches and a small pond")),
    ("castle", ("Castle", "Indoor", "a stone hall with banners and candle light")),
    ("school", ("School", "Indoor", "a bright classroom with desks and drawings")),
    ("meadow", ("Meadow", "Outdoor", "a quiet green meadow under a pale sky")),
)
DEFAULT_SETTING = ("Meadow", "Outdoor", "a quiet green meadow under a pale sky")

COLOR_HUES = {
    "red": 0, "orange": 30, "yellow": 60, "green": 120, "cyan": 180,
    "blue": 240, "purple": 270, "violet": 285, "magenta": 300, "pink": 330,
}


def name_hue_degrees(name: str) -> int:
    return stable_hash64("hue", name) % 360


def hue_bin(degrees: float) -> int:
    return int(degrees // BIN_DEGREES) % HUE_BINS


def bin_center(bin_index: int) -> float:
    return (bin_index + 0.5) * BIN_DEGREES


def parse_cast(prompt: str) -> list[str]:
    names: list[str] = []
    marker = CAST_MARKER.search(prompt)
    if marker:
        names.extend(p.strip() for p in marker.group(1).split(",") if p.strip())
    names.extend(NAME_PATTERN.findall(prompt))
    return list(dict.fromkeys(names))


def parse_setting(prompt: str) -> str | None:
    marker = SETTING_MARKER.search(prompt)
    return marker.group(1).strip() if marker else None


def _hsv_fill(hue_deg: float, sat: float, value: np.ndarray) -> np.ndarray:
    """Vectorized HSV->RGB for one hue/saturation and a per-pixel value map."""
    sector = int(hue_deg / 60.0) % 6
    f = hue_deg / 60.0 - int(hue_deg / 60.0)
    p = value * (1 - sat)
    q = value * (1 - sat * f)
    t = value * (1 - sat * (1 - f))
    v = value
    channels = {
        0: (v, t, p), 1: (q, v, p), 2: (p, v, t),
        3: (p, q, v), 4: (t, p, v), 5: (v, p, q),
    }[sector]
    return np.round(np.stack(channels, axis=-1) * 255).astype(np.uint8)


def hue_canvas(height: int, width: int, hue_deg: float, rng: np.random.Generator) -> np.ndarray:
    """A canvas of one hue rendered at its bin centre; texture varies only
    the HSV value channel so the quantized hue class stays constant."""
    centered = bin_center(hue_bin(hue_deg))
    value = 0.85 + 0.15 * rng.random((height, width))
    return _hsv_fill(centered, 0.75, value)


def gray_canvas(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    value = (160 + rng.integers(-12, 13, size=(height, width))).astype(np.uint8)
    return np.repeat(value[:, :, None], 3, axis=2)


def character_rect(canvas_w: int, canvas_h: int, index: int, count: int) -> tuple[int, int, int, int]:
    """(y0, y1, x0, x1) of character `index`'s region in a scene canvas."""
    rw = max(2, canvas_w // (2 * count))
    cx = int((index + 0.5) * canvas_w / count)
    x0 = max(0, cx - rw // 2)
    return canvas_h // 4, canvas_h // 4 + canvas_h // 2, x0, x0 + rw


def _require_prompt(prompt: str):
    if not prompt.strip():
        raise PermanentProviderError("blank prompt")


class MockImageProvider:
    """Paints names as hue-hash regions; deterministic per (request, ordinal)."""

    def __init__(self, resolution: int = 512):
        self.resolution = resolution

    def generate_images(self, request: ImageRequest, n: int) -> list[Image]:
        if n < 1:
            raise ValueError("n must be >= 1")
        _require_prompt(request.prompt)
        return [self._render(request, ordinal) for ordinal in range(n)]

    def _render(self, request: ImageRequest, ordinal: int) -> Image:
        size = self.resolution
        rng = np.random.default_rng(
            stable_hash64("mock-image", request.seed, ordinal, request.prompt)
        )
        names = parse_cast(request.prompt)
        setting = parse_setting(request.prompt)

        if setting is not None:
            canvas = hue_canvas(size, size, name_hue_degrees(setting), rng)
            rect_names = names
        elif names:
            canvas = hue_canvas(size, size, name_hue_degrees(names[0]), rng)
            rect_names = names[1:]
        else:
            canvas = gray_canvas(size, size, rng)
            rect_names = []

        for i, name in enumerate(rect_names):
            y0, y1, x0, x1 = character_rect(size, size, i, len(rect_names))
            canvas[y0:y1, x0:x1] = hue_canvas(
                y1 - y0, x1 - x0, name_hue_degrees(name), rng
            )
        return Image.from_array(canvas)

    def region_replace(
        self, image: Image, mask: SegmentationMask, request: ImageRequest
    ) -> Image:
        _require_prompt(request.prompt)
        if mask.bitmap.shape != (image.height, image.width):
            raise PermanentProviderError("mask dimensions do not match image")
        names = parse_cast(request.prompt)
        subject = names[0] if names else request.prompt
        rng = np.random.default_rng(
            stable_hash64("mock-replace", request.seed, request.prompt)
        )
        fill = hue_canvas(image.height, image.width, name_hue_degrees(subject), rng)
        out = np.array(image.pixels)
        out[mask.bitmap] = fill[mask.bitmap]
        return Image.from_array(out)


def _box_blur(arr: np.ndarray) -> np.ndarray:
    p = np.pad(arr.astype(np.int32), ((1, 1), (1, 1), (0, 0)), mode="edge")
    s = (
        p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
        + p[1:-1, :-2] + p[1:-1, 1:-1] + p[1:-1, 2:]
        + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:]
    )
    return (s // 9).astype(np.uint8)


_DIRECTIONS = ((0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (-1, -1), (1, -1), (-1, 1))


class MockVideoProvider:
    """Animates the conditioning image by a per-candidate drift/noise
    schedule scaled by params.motion; motion 0 freezes the clip."""

    def __init__(self, fps: float = 8.0):
        self.fps = fps

    def generate_videos(self, request: VideoRequest, n: int) -> list[FrameSequence]:
        if n < 1:
            raise ValueError("n must be >= 1")
        _require_prompt(request.prompt)
        return [self._render(request, ordinal) for ordinal in range(n)]

    def _render(self, request: VideoRequest, ordinal: int) -> FrameSequence:
        motion = request.params.motion
        if motion == 0:
            return FrameSequence(
                frames=(request.conditioning_image,) * request.frame_count, fps=self.fps
            )
        # candidate personality (drift direction, blur, noise draws) is keyed
        # by (seed, ordinal); motion only scales magnitudes, so raising it
        # strictly raises frame-to-frame deltas for the same seed
        rng = np.random.default_rng(
            stable_hash64(
                "mock-video", request.seed, ordinal,
                request.prompt, request.frame_count,
            )
        )
        dy, dx = _DIRECTIONS[int(rng.integers(0, len(_DIRECTIONS)))]
        blurry = bool(rng.random() < 0.3)
        amp = 2 * motion
        base = np.asarray(request.conditioning_image.pixels)
        h, w = base.shape[:2]

        frames = [request.conditioning_image]
        for t in range(1, request.frame_count):
            arr = np.roll(base, (dy * motion * t, dx * motion * t), axis=(0, 1))
            noise = rng.integers(-amp, amp + 1, size=(h, w, 1)).astype(np.int16)
            arr = np.clip(arr.astype(np.int16) + noise, 0, 255).astype(np.uint8)
            if blurry:
                arr = _box_blur(arr)
            frames.append(Image.from_array(arr))
        return FrameSequence(frames=tuple(frames), fps=self.fps)


class MockSegmenter:
    """Connected components over the quantized hue/value class grid.
    Masks partition the image; the largest component is the background."""

    def segment(self, image: Image) -> list[SegmentationMask]:
        classes = kernels.class_grid(np.asarray(image.pixels))
        labels = kernels.label_components(classes)
        areas = np.bincount(labels.ravel())
        background = int(np.argmax(areas))
        rest = sorted(
            (l for l in range(len(areas)) if l != background),
            key=lambda l: (-int(areas[l]), l),
        )
        masks = [SegmentationMask.from_bitmap("background", labels == background)]
        for i, label in enumerate(rest):
            masks.append(SegmentationMask.from_bitmap(f"region_{i + 1:02d}", labels == label))
        return masks


class MockEmbedder:
    """Toy 64-dim embedder: 4x4 grayscale downsample (16 dims) plus a
    48-bin hue histogram, L2-normalized. Text maps colour words to hue
    bins and everything else to a stable pseudo-random direction."""

    dimension = 64

    def embed_image(self, image: Image) -> EmbeddingVector:
        full = np.ones((image.height, image.width), dtype=np.uint8)
        return self.embed_image_region(image, full)

    def embed_image_region(self, image: Image, bitmap: np.ndarray) -> EmbeddingVector:
        moments = kernels.masked_moments(
            np.asarray(image.pixels), np.ascontiguousarray(bitmap, dtype=np.uint8)
        )
        block_sums, block_counts, hist, total = moments
        v = np.zeros(64, dtype=np.float64)
        for i in range(16):
            if block_counts[i]:
                v[i] = (block_sums[i] / block_counts[i]) / 255.0
        if total:
            v[16:] = hist / total
        return EmbeddingVector(values=_unit(v), dimension=self.dimension)

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise PermanentProviderError("blank text")
        v = np.zeros(64, dtype=np.float64)
        for token in re.findall(r"[a-z]+", text.lower()):
            if token in COLOR_HUES:
                v[16 + hue_bin(COLOR_HUES[token])] += 1.0
            else:
                rng = np.random.default_rng(stable_hash64("word", token))
                u = rng.standard_normal(64)
                v += 0.3 * u / np.sqrt(float(u @ u))
        return EmbeddingVector(values=_unit(v), dimension=self.dimension)


def _unit(v: np.ndarray) -> np.ndarray:
    norm_sq = float(v @ v)
    if norm_sq == 0.0:
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return v / np.sqrt(norm_sq)


def judge_choice(attachments: tuple[Image, ...]) -> int:
    """1-based candidate pick: 1 + hash(concatenated digests) mod n."""
    payload = "".join(img.content_hash for img in attachments)
    return 1 + stable_hash64(payload) % len(attachments)


class MockChatProvider:
    """Answers each instruction family with deterministic, parseable text.

    Dispatch keys off fixed phrases in the bundled templates; see the
    module docstring. `seed` varies the generated flavour text, and
    `scene_count` fixes how many scene lines the script persona emits.
    """

    attachment_limit = 16

    def __init__(self, seed: int = 0, scene_count: int = 3):
        self.seed = seed
        self.scene_count = scene_count

    def chat(self, messages) -> str:
        if not messages:
            raise PermanentProviderError("no messages")
        last = messages[-1]
        text = last.text
        attachments = tuple(last.attached_images)
        if len(attachments) > self.attachment_limit:
            raise PermanentProviderError(
                f"{len(attachments)} attachments exceed the limit of {self.attachment_limit}"
            )

        if "character consistency" in text and NO_PROBLEM_SENTINEL in text and attachments:
            return self._consistency_check(text, attachments)
        if "numbered from 1 to" in text and attachments:
            return self._judge(attachments)
        if "video candidates" in text and attachments:
            return self._judge(attachments)
        if "approximately 150 words" in text:
            return self._refine(text)
        if "Generate the character list and scene settings" in text:
            return self._profiles(text)
        if "[All Characters Included][Setting Included]" in text:
            return self._scenes(text)
        if "Review each scene in Part 'Scenes'" in text:
            return self._verify(text)
        if "Generate prompts for the image generation tool" in text:
            return self._image_prompt(text)
        if "Json Template" in text:
            return self._params(text)
        if "visual animation descriptions" in text:
            return self._video_prompt(text)
        digest = stable_hash64("fallback", text) % 10**8
        return f"Acknowledged ({digest})."

    # -- content helpers -------------------------------------------------

    def _pick(self, bank: tuple[str, ...], *key: object) -> str:
        return bank[stable_hash64(self.seed, *key) % len(bank)]

    def _characters_in(self, text: str) -> list[str]:
        names = list(dict.fromkeys(NAME_PATTERN.findall(text)))
        if names:
            return names
        nouns = list(dict.fromkeys(n.lower() for n in NOUN_PATTERN.findall(text)))
        if nouns:
            return [f"{NAME_BANK[i % len(NAME_BANK)]} the {noun}"
                    for i, noun in enumerate(nouns)]
        return ["Alex the traveler"]

    def _setting_in(self, text: str) -> tuple[str, str, str]:
        lowered = text.lower()
        for word, entry in SETTING_TABLE:
            if word in lowered:
                return entry
        return DEFAULT_SETTING

    # -- personas ---------------------------------------------------------

    def _refine(self, text: str) -> str:
        match = re.search(
            r"the provided story\s+(.*?)\s+is approximately 150 words", text, re.S
        )
        narrative = match.group(1).strip() if match else text
        characters = self._characters_in(narrative)
        setting_name, _, setting_desc = self._setting_in(narrative)

        fillers = (
            '{a} looked around the {place} and said, "What a fine day this is."',
            "{a} padded slowly past {b}, tail flicking with quiet excitement.",
            'With a sudden grin, {a} whispered, "Follow me, {b}, I found something."',
            "The light over the {place} shifted, and {a} felt the day turn important.",
            "{b} hesitated, then hurried after {a}, heart thumping with curiosity.",
            "A gust stirred the {place}, scattering leaves around {a} and {b}.",
            "{a} stopped short; hidden near the edge of the {place} lay a small key.",
            '"We should be careful," said {b}, though {a} was already moving closer.',
            "For a moment neither moved, and the {place} seemed to hold its breath.",
            "Then {a} laughed, the tension broke, and {b} joined in despite everything.",
        )
        story = narrative.strip()
        if not story.endswith((".", "!", '"', "?")):
            story += "."
        story += f" The {setting_name.lower()} was {setting_desc}."
        i = 0
        while len(story.split()) < 140:
            a = characters[i % len(characters)]
            b = characters[(i + 1) % len(characters)]
            sentence = self._pick(fillers, "refine", narrative, i).format(
                a=a, b=b, place=setting_name.lower()
            )
            story += " " + sentence
            i += 1
        return story

    def _profiles(self, text: str) -> str:
        match = re.search(
            r"for the story\s+(.*?)\s+and present detailed descriptions", text, re.S
        )
        story = match.group(1).strip() if match else text
        characters = self._characters_in(story)
        setting_name, placement, setting_desc = self._setting_in(story)

        traits = ("curious and quick", "gentle and patient", "bold and playful",
                  "shy but loyal", "clever and watchful")
        looks = ("neat fur and bright eyes", "a fluffy coat and round ears",
                 "sleek colouring and long whiskers", "soft spots and a short tail")
        lines = ["## Characters"]
        for name in characters:
            kind = name.split(" the ", 1)[1] if " the " in name else "figure"
            lines.append(
                f"{name}: a {kind} with {self._pick(looks, 'look', name)}, "
                f"{self._pick(traits, 'trait', name)}, central to the story's events."
            )
        lines += ["", "## Settings", f"{setting_name} ({placement}): {setting_desc}."]
        return "\n".join(lines)

    def _scenes(self, text: str) -> str:
        match = re.search(
            r"characters and settings\s*\n(.*?)\nUse the format", text, re.S
        )
        doc = match.group(1) if match else text
        characters, setting_name = _profiles_doc_names(doc)

        duo_actions = (
            "chases {b} around the old oak tree, laughing with delight",
            "sits quietly beside {b}, sharing a small snack in the shade",
            "runs after a bouncing red ball while {b} cheers loudly",
            "naps peacefully while {b} watches the clouds drift past",
            "leaps over a puddle as {b} dashes alongside",
            "rests in the warm light and listens to {b} hum a tune",
        )
        solo_actions = (
            "chases a drifting butterfly around the old oak tree",
            "sits quietly in the shade, watching the light move",
            "runs in wide happy circles until out of breath",
            "naps peacefully in the warmest corner",
        )
        lines = ["## Scenes"]
        for i in range(self.scene_count):
            a = characters[i % len(characters)]
            if len(characters) > 1:
                b = characters[(i + 1) % len(characters)]
                action = duo_actions[
                    stable_hash64(self.seed, "scene", doc, i) % len(duo_actions)
                ].format(b=b)
            else:
                action = solo_actions[
                    stable_hash64(self.seed, "scene", doc, i) % len(solo_actions)
                ]
            description = f"{a} {action}."
            lines.append(f"[{', '.join(characters)}][{setting_name}]: {description}")
        return "\n".join(lines)

    def _verify(self, text: str) -> str:
        parts = text.split("\nScript:\n", 1)
        doc = parts[1] if len(parts) == 2 else text
        try:
            script = parse_script(doc)
        except Exception:
            return "Yes. " + doc
        if validate_script(script).ok:
            return f"{NO_PROBLEM_SENTINEL} Everything is consistent."
        fixed = _repair_script(script)
        return "Yes. Here is the revised script:\n\n" + serialize_script(fixed)

    def _image_prompt(self, text: str) -> str:
        desc = _between(text, "Scene description: ", "\nCharacters:")
        char_block = _between(text, "Characters:\n", "\nSetting:\n")
        setting_block = text.rsplit("Setting:\n", 1)[-1]
        names = [ln.split(":", 1)[0].strip()
                 for ln in char_block.splitlines() if ":" in ln]
        setting_name = setting_block.split("(", 1)[0].strip() or "Meadow"
        cast = ", ".join(names) if names else "the main character"
        return (
            f"{desc.strip()} A clear, simple illustration. "
            f"| cast: {cast} | setting: {setting_name}"
        )

    def _params(self, text: str) -> str:
        desc = text.rsplit("Scene description:", 1)[-1].strip()
        lowered = desc.lower()
        dynamic = ("chase", "runs", "running", "dash", "leap", "jump", "race")
        static = ("sits", "nap", "sleep", "rest", "watch", "quiet")
        if any(w in lowered for w in dynamic):
            motion = 3
        elif any(w in lowered for w in static):
            motion = 1
        else:
            motion = 2
        guidance = 8 + stable_hash64("guidance", desc) % 8
        camera = {
            "zoom": "in" if "close" in lowered else None,
            "pan": "left" if " left" in lowered else ("right" if " right" in lowered else None),
            "tilt": None,
            "rotate": None,
        }
        import json as _json

        payload = {
            "description": desc,
            "option": {
                "parameters": {
                    "motion": motion,
                    "guidanceScale": guidance,
                    "negativePrompt": "blurry, distorted, extra limbs",
                },
                "camera": camera,
            },
        }
        return "Here are suitable parameters.\n```json\n" + _json.dumps(payload, indent=2) + "\n```"

    def _video_prompt(self, text: str) -> str:
        match = re.search(r"Animation description:\s*(.*?);\s*Character description:", text, re.S)
        desc = match.group(1).strip() if match else "the scene unfolds gently"
        return (
            "Part#1. Screen Description: a steady wide shot of the whole scene. "
            f"Part#2. Action Description: {desc}"
        )

    def _judge(self, attachments: tuple[Image, ...]) -> str:
        k = judge_choice(attachments)
        return (
            f"The answer is image {k}. Its content aligns best with the "
            "described action and layout."
        )

    def _consistency_check(self, text: str, attachments: tuple[Image, ...]) -> str:
        match = re.search(r"in order:\s*(.*?)\.\s", text, re.S)
        names = [n.strip() for n in match.group(1).split(";")] if match else []
        scene = attachments[0]
        scene_classes = kernels.class_grid(np.asarray(scene.pixels))
        scene_counts = np.bincount(scene_classes.ravel(), minlength=HUE_BINS)
        threshold = max(1, int(0.02 * scene.width * scene.height))

        for i, name in enumerate(names):
            if 1 + i >= len(attachments):
                break
            ref = attachments[1 + i]
            ref_classes = kernels.class_grid(np.asarray(ref.pixels))
            chromatic = ref_classes[ref_classes < HUE_BINS]
            if chromatic.size == 0:
                continue  # achromatic reference: nothing to compare on
            target = int(np.bincount(chromatic).argmax())
            if scene_counts[target] < threshold:
                return (
                    f"The character {name} does not match its reference "
                    "appearance in the scene."
                )
        return f"{NO_PROBLEM_SENTINEL} All characters match their references."


def _between(text: str, start: str, end: str) -> str:
    try:
        after = text.split(start, 1)[1]
        return after.split(end, 1)[0]
    except IndexError:
        return ""


def _profiles_doc_names(doc: str) -> tuple[list[str], str]:
    characters: list[str] = []
    setting_name = DEFAULT_SETTING[0]
    section = None
    for raw in doc.splitlines():
        line = raw.strip()
        if line.startswith("## "):
            section = line
            continue
        if not line or ":" not in line:
            continue
        head = line.split(":", 1)[0].strip()
        if section == "## Characters":
            characters.append(head)
        elif section == "## Settings":
            setting_name = head.split("(", 1)[0].strip()
    if not characters:
        characters = ["Alex the traveler"]
    return characters, setting_name


def _repair_script(script: Script) -> Script:
    """Resolve every cross-reference problem: rename case mismatches to the
    profile casing, invent profiles for unknown names, drop duplicates."""
    chars = list(dict.fromkeys(c.name for c in script.characters))
    char_profiles = {c.name: c for c in script.characters}
    settings = list(dict.fromkeys(s.name for s in script.settings))
    setting_profiles = {s.name: s for s in script.settings}
    char_folded = {n.casefold(): n for n in chars}
    setting_folded = {n.casefold(): n for n in settings}

    new_scenes = []
    for scene in script.scenes:
        fixed_names = []
        for name in scene.characters:
            if name in char_profiles:
                fixed_names.append(name)
            elif name.casefold() in char_folded:
                fixed_names.append(char_folded[name.casefold()])
            else:
                chars.append(name)
                char_folded[name.casefold()] = name
                char_profiles[name] = CharacterProfile(
                    name=name, description=f"a character known as {name}"
                )
                fixed_names.append(name)
        setting = scene.setting
        if setting not in setting_profiles:
            if setting.casefold() in setting_folded:
                setting = setting_folded[setting.casefold()]
            else:
                settings.append(setting)
                setting_folded[setting.casefold()] = setting
                setting_profiles[setting] = SettingProfile(
                    name=setting,
                    placement=Placement.OUTDOOR,
                    description=f"a simple backdrop called {setting}",
                )
        new_scenes.append(
            type(scene)(
                index=scene.index,
                characters=tuple(dict.fromkeys(fixed_names)),
                setting=setting,
                description=scene.description,
            )
        )
    return Script(
        characters=tuple(char_profiles[n] for n in chars),
        settings=tuple(setting_profiles[n] for n in settings),
        scenes=tuple(new_scenes),
    )
