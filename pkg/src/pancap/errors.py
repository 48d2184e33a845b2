"""Exception hierarchy shared by every pancap module."""

from __future__ import annotations


class PancapError(Exception):
    """Base class for all errors raised by pancap."""


# -- geometry / validation ---------------------------------------------------


class BoxError(PancapError, ValueError):
    pass


class DegenerateBox(BoxError):
    pass


class OutOfRange(BoxError):
    pass


# -- parsing -----------------------------------------------------------------


class ParseError(PancapError, ValueError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class MalformedBox(ParseError):
    pass


class EmptyTag(ParseError):
    pass


class DanglingReference(PancapError, ValueError):
    pass


class DuplicateInstanceId(PancapError, ValueError):
    pass


class TemplateError(PancapError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


# -- scoring -----------------------------------------------------------------


class CountInconsistency(PancapError, ValueError):
    pass


class DegenerateVariance(PancapError, ValueError):
    pass


class AllTied(PancapError, ValueError):
    pass


# -- providers ---------------------------------------------------------------


class ProviderError(PancapError):
    pass


class TransientProviderError(ProviderError):
    """Retryable failure; the retry loop re-raises it once the budget is spent."""


class ProviderTimeout(TransientProviderError):
    pass


class RateLimited(TransientProviderError):
    pass


class AuthFailure(ProviderError):
    pass


class MalformedResponse(ProviderError):
    pass


class EmbeddingUnavailable(ProviderError):
    pass


# -- pipeline ----------------------------------------------------------------


class CaptionFailure(PancapError):
    """A failure tied to one caption; ``caption_id`` lets batch runners report it."""

    def __init__(self, message: str, caption_id: str | None = None):
        self.caption_id = caption_id
        super().__init__(message if caption_id is None else f"[{caption_id}] {message}")


class ExtractionFailed(CaptionFailure):
    pass


class JudgeFailed(CaptionFailure):
    pass


class GenerationFailed(PancapError):
    pass


class StageParseFailure(PancapError):
    def __init__(self, stage: int, raw_reply: str, reason: str = ""):
        self.stage = stage
        self.raw_reply = raw_reply
        super().__init__(f"stage {stage} reply did not parse: {reason or raw_reply[:80]!r}")


class NoInstances(PancapError, ValueError):
    pass


class UntaggedRegion(PancapError, ValueError):
    pass


class NewerReportSchema(PancapError):
    """Raised instead of overwriting a report written by a newer schema version."""
