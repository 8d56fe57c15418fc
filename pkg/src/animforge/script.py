"""Director's-script domain model: narratives, character/setting profiles,
the "[Characters][Setting]: description" scene-line grammar, the section
document format, and the cross-reference validator.

Everything here is pure and operates on immutable values. Names are
compared by exact string equality after trimming and Unicode NFC
normalization; no fuzzy matching.
"""
from __future__ import annotations

import enum
import hashlib
import json
import unicodedata
from dataclasses import dataclass, field

from .errors import EmptyField, MalformedProfileLine, MalformedSceneLine, MissingSection

CHARACTERS_HEADER = "## Characters"
SETTINGS_HEADER = "## Settings"
SCENES_HEADER = "## Scenes"

# characters and setting names live inside bracket groups / before colons
_FORBIDDEN_IN_NAME = set("[],\n")


def canonical_name(raw: str) -> str:
    return unicodedata.normalize("NFC", raw.strip())


class Placement(enum.Enum):
    INDOOR = "indoor"
    OUTDOOR = "outdoor"


@dataclass(frozen=True)
class Narrative:
    text: str
    id: str = ""

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("narrative text is empty")
        if not self.id:
            digest = hashlib.sha256(self.text.encode("utf-8")).hexdigest()[:12]
            object.__setattr__(self, "id", f"narrative-{digest}")


@dataclass(frozen=True)
class RefinedStory:
    text: str
    word_count: int
    source: str

    def __post_init__(self):
        actual = len(self.text.split())
        if actual != self.word_count or self.word_count <= 0:
            raise ValueError(f"word_count {self.word_count} != token count {actual}")

    @classmethod
    def from_text(cls, text: str, source: str) -> "RefinedStory":
        return cls(text=text, word_count=len(text.split()), source=source)


@dataclass(frozen=True)
class CharacterProfile:
    name: str
    description: str

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("character name is empty")


@dataclass(frozen=True)
class SettingProfile:
    name: str
    placement: Placement
    description: str


@dataclass(frozen=True)
class SceneSpec:
    index: int
    characters: tuple[str, ...]
    setting: str
    description: str

    def __post_init__(self):
        if len(set(self.characters)) != len(self.characters):
            raise ValueError("duplicate character in scene")
        if not self.description.strip():
            raise ValueError("scene description is empty")


@dataclass(frozen=True)
class Script:
    characters: tuple[CharacterProfile, ...]
    settings: tuple[SettingProfile, ...]
    scenes: tuple[SceneSpec, ...]


class ViolationKind(enum.Enum):
    UNKNOWN_CHARACTER = "UnknownCharacter"
    UNKNOWN_SETTING = "UnknownSetting"
    TERMINOLOGY_MISMATCH = "TerminologyMismatch"
    MISSING_CHARACTER = "MissingCharacter"


@dataclass(frozen=True)
class Violation:
    scene_index: int  # -1 for profile-level problems
    kind: ViolationKind
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations


def _validate_name(name: str, what: str) -> str:
    name = canonical_name(name)
    if not name:
        raise EmptyField(f"empty {what}")
    bad = _FORBIDDEN_IN_NAME & set(name)
    if bad:
        raise MalformedSceneLine(f"{what} contains forbidden characters {sorted(bad)!r}")
    return name


def _take_bracket_group(line: str, start: int) -> tuple[str, int]:
    """Return (content, index after the closing bracket) for the group
    opening at `start`; nesting must balance."""
    if start >= len(line) or line[start] != "[":
        raise MalformedSceneLine(f"expected '[' at position {start}")
    depth = 0
    for i in range(start, len(line)):
        ch = line[i]
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                return line[start + 1 : i], i + 1
    raise MalformedSceneLine("unbalanced brackets")


def parse_scene_line(line: str) -> SceneSpec:
    """Parse one "[a, b][setting]: description" scene line.

    Takes the first two top-level bracket groups; the description is
    everything after the first colon that follows the second group, so
    bracketed asides inside descriptions are untouched.
    """
    stripped = line.strip()
    if "[" not in stripped:
        raise MalformedSceneLine("no bracket group found")
    if not stripped.startswith("["):
        raise MalformedSceneLine("scene line must start with a bracket group")

    chars_raw, pos = _take_bracket_group(stripped, 0)
    while pos < len(stripped) and stripped[pos].isspace():
        pos += 1
    if pos >= len(stripped) or stripped[pos] != "[":
        raise MalformedSceneLine("second bracket group missing")
    setting_raw, pos = _take_bracket_group(stripped, pos)

    colon = stripped.find(":", pos)
    if colon == -1:
        raise MalformedSceneLine("no colon after setting group")
    if stripped[pos:colon].strip():
        raise MalformedSceneLine("unexpected text between setting group and colon")

    if not chars_raw.strip():
        raise EmptyField("empty character group")
    characters = tuple(_validate_name(part, "character name") for part in chars_raw.split(","))
    if len(set(characters)) != len(characters):
        raise MalformedSceneLine("duplicate character name in scene line")
    setting = _validate_name(setting_raw, "setting name")
    description = stripped[colon + 1 :].strip()
    if not description:
        raise EmptyField("empty description")
    return SceneSpec(index=0, characters=characters, setting=setting, description=description)


def serialize_scene_line(scene: SceneSpec) -> str:
    return f"[{', '.join(scene.characters)}][{scene.setting}]: {scene.description}"


def _parse_character_line(line: str) -> CharacterProfile:
    name, sep, description = line.partition(":")
    if not sep:
        raise MalformedProfileLine(f"no colon in character line: {line!r}")
    return CharacterProfile(name=canonical_name(name), description=description.strip())


def _parse_setting_line(line: str) -> SettingProfile:
    head, sep, description = line.partition(":")
    if not sep:
        raise MalformedProfileLine(f"no colon in setting line: {line!r}")
    head = head.strip()
    if not head.endswith(")") or "(" not in head:
        raise MalformedProfileLine(f"setting line lacks '(Indoor/Outdoor)': {line!r}")
    name, _, placement_raw = head.rpartition("(")
    placement_raw = placement_raw[:-1].strip().lower()
    if placement_raw not in ("indoor", "outdoor"):
        raise MalformedProfileLine(f"placement must be Indoor or Outdoor: {line!r}")
    name = canonical_name(name)
    if not name:
        raise MalformedProfileLine(f"empty setting name: {line!r}")
    return SettingProfile(
        name=name, placement=Placement(placement_raw), description=description.strip()
    )


def parse_script(text: str) -> Script:
    """Parse a section document into a Script.

    Cross-reference invariants are NOT enforced here; run validate_script
    on the result. Scene indices follow document order.
    """
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if line in (CHARACTERS_HEADER, SETTINGS_HEADER, SCENES_HEADER):
            current = sections.setdefault(line, [])
            continue
        if not line:
            continue
        if current is not None:
            current.append(line)

    for header in (CHARACTERS_HEADER, SETTINGS_HEADER, SCENES_HEADER):
        if header not in sections:
            raise MissingSection(f"missing section header {header!r}")

    characters = tuple(_parse_character_line(ln) for ln in sections[CHARACTERS_HEADER])
    settings = tuple(_parse_setting_line(ln) for ln in sections[SETTINGS_HEADER])

    scenes = []
    for idx, ln in enumerate(sections[SCENES_HEADER]):
        try:
            parsed = parse_scene_line(ln)
        except (MalformedSceneLine, EmptyField) as exc:
            raise type(exc)(f"scene {idx}: {exc}") from exc
        scenes.append(
            SceneSpec(
                index=idx,
                characters=parsed.characters,
                setting=parsed.setting,
                description=parsed.description,
            )
        )
    return Script(characters=characters, settings=settings, scenes=tuple(scenes))


def serialize_script(script: Script) -> str:
    lines = [CHARACTERS_HEADER]
    lines += [f"{c.name}: {c.description}" for c in script.characters]
    lines += ["", SETTINGS_HEADER]
    lines += [
        f"{s.name} ({s.placement.value.capitalize()}): {s.description}"
        for s in script.settings
    ]
    lines += ["", SCENES_HEADER]
    lines += [serialize_scene_line(sc) for sc in script.scenes]
    return "\n".join(lines) + "\n"


def validate_script(script: Script) -> ValidationReport:
    """Cross-reference check: every scene reference must resolve to exactly
    one profile. Problems are data, not errors."""
    violations: list[Violation] = []

    def check_duplicates(names: list[str], what: str):
        seen: set[str] = set()
        for name in names:
            if name in seen:
                violations.append(
                    Violation(-1, ViolationKind.TERMINOLOGY_MISMATCH,
                              f"duplicate {what} profile name {name!r}")
                )
            seen.add(name)

    char_names = [c.name for c in script.characters]
    setting_names = [s.name for s in script.settings]
    check_duplicates(char_names, "character")
    check_duplicates(setting_names, "setting")

    chars_exact = set(char_names)
    chars_folded = {n.casefold(): n for n in char_names}
    settings_exact = set(setting_names)
    settings_folded = {n.casefold(): n for n in setting_names}

    for scene in script.scenes:
        for name in scene.characters:
            if name in chars_exact:
                continue
            if name.casefold() in chars_folded:
                violations.append(
                    Violation(scene.index, ViolationKind.TERMINOLOGY_MISMATCH,
                              f"character {name!r} differs in case from profile "
                              f"{chars_folded[name.casefold()]!r}")
                )
            else:
                violations.append(
                    Violation(scene.index, ViolationKind.UNKNOWN_CHARACTER,
                              f"character {name!r} has no profile")
                )
        if scene.setting in settings_exact:
            continue
        if scene.setting.casefold() in settings_folded:
            violations.append(
                Violation(scene.index, ViolationKind.TERMINOLOGY_MISMATCH,
                          f"setting {scene.setting!r} differs in case from profile "
                          f"{settings_folded[scene.setting.casefold()]!r}")
            )
        else:
            violations.append(
                Violation(scene.index, ViolationKind.UNKNOWN_SETTING,
                          f"setting {scene.setting!r} has no profile")
            )
    return ValidationReport(violations=tuple(violations))


def script_to_json(script: Script) -> str:
    """Canonical machine-readable serialization; the checkpoint format."""
    doc = {
        "characters": [
            {"name": c.name, "description": c.description} for c in script.characters
        ],
        "settings": [
            {"name": s.name, "placement": s.placement.value, "description": s.description}
            for s in script.settings
        ],
        "scenes": [
            {
                "index": sc.index,
                "characters": list(sc.characters),
                "setting": sc.setting,
                "description": sc.description,
            }
            for sc in script.scenes
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def script_from_json(text: str) -> Script:
    doc = json.loads(text)
    return Script(
        characters=tuple(
            CharacterProfile(name=c["name"], description=c["description"])
            for c in doc["characters"]
        ),
        settings=tuple(
            SettingProfile(
                name=s["name"],
                placement=Placement(s["placement"]),
                description=s["description"],
            )
            for s in doc["settings"]
        ),
        scenes=tuple(
            SceneSpec(
                index=sc["index"],
                characters=tuple(sc["characters"]),
                setting=sc["setting"],
                description=sc["description"],
            )
            for sc in doc["scenes"]
        ),
    )


def report_to_json(report: ValidationReport) -> str:
    doc = {
        "violations": [
            {"scene_index": v.scene_index, "kind": v.kind.value, "detail": v.detail}
            for v in report.violations
        ]
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
