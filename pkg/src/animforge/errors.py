"""Exception taxonomy. Domain problems raise subclasses of AnimForgeError;
the CLI maps those to exit code 1."""
from __future__ import annotations


class AnimForgeError(Exception):
    """Base class for all declared domain errors."""


# script grammar
class MalformedSceneLine(AnimForgeError):
    pass


class EmptyField(AnimForgeError):
    pass


class MissingSection(AnimForgeError):
    pass


class MalformedProfileLine(AnimForgeError):
    pass


# structured-reply parsing
class MissingSlot(AnimForgeError):
    pass


class UnknownSlot(AnimForgeError):
    pass


class NoVerdictFound(AnimForgeError):
    pass


class IndexOutOfRange(AnimForgeError):
    pass


class NoJsonFound(AnimForgeError):
    pass


class SchemaViolation(AnimForgeError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


# providers
class ProviderError(AnimForgeError):
    pass


class TransientProviderError(ProviderError):
    """Retried per policy before being surfaced."""


class PermanentProviderError(ProviderError):
    pass


class RateLimitedError(TransientProviderError):
    def __init__(self, message: str = "rate limited", retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


# metrics
class ImageTooSmall(AnimForgeError):
    pass


class ClipTooShort(AnimForgeError):
    pass


class NoSubjectFound(AnimForgeError):
    pass


# curation
class ScoresMissing(AnimForgeError):
    pass


class JudgeFailed(AnimForgeError):
    pass


# pipeline
class ConfigInvalid(AnimForgeError):
    pass


class StageFailed(AnimForgeError):
    def __init__(self, stage: str, cause: str):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


class RefinementFailed(AnimForgeError):
    pass


class ScriptUnrepairable(AnimForgeError):
    pass


class CorruptWorkspace(AnimForgeError):
    pass


class ConfigMismatch(AnimForgeError):
    pass
