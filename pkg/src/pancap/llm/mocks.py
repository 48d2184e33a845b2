"""Deterministic offline providers.

These are part of the public API: every downstream test and the ``--mock``
CLI mode run on them without network access.

* :class:`EchoChat` replies with the last user message.
* :class:`ReplayChat` replays a recorded transcript in order.
* :class:`ScriptedChat` answers by substring rules (stateless).
* :class:`HashedBagOfWordsEmbedder` maps each token to a hashed coordinate,
  so texts without shared tokens are orthogonal.
* :class:`OracleExtractorChat`, :class:`NegationChat` and
  :class:`OracleJudgeChat` implement extraction, no-question generation and
  judging exactly from structured fixtures.
* :class:`EntityCaptionerChat` writes a caption listing the entities of an
  entity-aware prompt.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from ..captions import (
    format_box,
    parse_caption,
    parse_instance_text,
    parse_semantic_content,
    serialize_semantic_lines,
)
from ..errors import MalformedResponse, ParseError
from ..types import SemanticContent
from .profiles import ProviderProfile
from .prompts import RenderedPrompt
from .providers import ChatProvider, Embedder


def section(text: str, header: str) -> Optional[str]:
    """Body of a ``### header`` section, up to the next ``###`` line."""
    marker = f"### {header}\n"
    start = text.rfind(marker)
    if start < 0:
        return None
    body = text[start + len(marker):]
    nxt = re.search(r"^### ", body, flags=re.MULTILINE)
    return (body[:nxt.start()] if nxt else body).rstrip("\n")


class EchoChat(ChatProvider):
    default_kind = "mock-echo"

    def _complete(self, prompt: RenderedPrompt, image: Optional[str]) -> str:
        return prompt.text


class ReplayChat(ChatProvider):
    """Replays recorded replies byte-exactly, one per call, in order."""

    default_kind = "mock-replay"

    def __init__(self, transcript: Union[Sequence[Any], str, Path],
                 profile: Optional[ProviderProfile] = None):
        if profile is None:
            profile = ProviderProfile(name="replay", kind="mock-replay", cache=False,
                                      backoff_base=0.0, multimodal=True)
        super().__init__(profile)
        if isinstance(transcript, (str, Path)):
            with open(transcript, encoding="utf-8") as fh:
                transcript = json.load(fh)
        self.replies = [t["reply"] if isinstance(t, dict) else str(t) for t in transcript]
        self.prompts: list[RenderedPrompt] = []
        self._next = 0

    def _complete(self, prompt: RenderedPrompt, image: Optional[str]) -> str:
        with self._cache_lock:
            if self._next >= len(self.replies):
                raise MalformedResponse("replay transcript exhausted")
            reply = self.replies[self._next]
            self._next += 1
            self.prompts.append(prompt)
        return reply

    def reset(self) -> None:
        with self._cache_lock:
            self._next = 0
            self.prompts.clear()


class ScriptedChat(ChatProvider):
    """Stateless scripted replies: the first rule whose key occurs in the prompt wins."""

    default_kind = "mock-replay"

    def __init__(self, rules: Union[Mapping[str, str], Iterable[tuple[str, str]],
                                    Callable[[RenderedPrompt], str]],
                 default: Optional[str] = None, profile: Optional[ProviderProfile] = None):
        if profile is None:
            profile = ProviderProfile(name="scripted", kind="mock-replay", backoff_base=0.0,
                                      multimodal=True)
        super().__init__(profile)
        self._fn = rules if callable(rules) else None
        self._rules = [] if callable(rules) else list(rules.items() if isinstance(rules, Mapping) else rules)
        self.default = default

    def _complete(self, prompt: RenderedPrompt, image: Optional[str]) -> str:
        if self._fn is not None:
            return self._fn(prompt)
        text = "\n".join(c for _, c in prompt.messages)
        for key, reply in self._rules:
            if key in prompt.text or key in text:
                return reply
        if self.default is None:
            raise MalformedResponse(f"no scripted reply for prompt {prompt.text[:60]!r}")
        return self.default


_TOKEN = re.compile(r"[a-z0-9]+")


class HashedBagOfWordsEmbedder(Embedder):
    default_kind = "mock-hash-embed"

    def __init__(self, dim: int = 1 << 16, profile: Optional[ProviderProfile] = None):
        super().__init__(profile)
        self.dim = dim

    def bucket(self, token: str) -> int:
        h = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(h, "little") % self.dim

    def _embed(self, text: str) -> np.ndarray:
        tokens = _TOKEN.findall(text.lower()) or [text.strip().lower()]
        vec = np.zeros(self.dim)
        for tok in tokens:
            vec[self.bucket(tok)] += 1.0
        return vec


# -- oracle mocks ------------------------------------------------------------


class OracleExtractorChat(ChatProvider):
    """Extraction oracle.

    Captions found in ``registry`` return their stored content; any other
    caption yields the instances of its box markup and no items.
    """

    default_kind = "mock-oracle-extractor"

    def __init__(self, registry: Optional[Mapping[str, SemanticContent]] = None,
                 profile: Optional[ProviderProfile] = None):
        super().__init__(profile)
        self.registry = {k.strip(): v for k, v in (registry or {}).items()}

    def register(self, caption: str, content: SemanticContent) -> None:
        self.registry[caption.strip()] = content

    def _complete(self, prompt: RenderedPrompt, image: Optional[str]) -> str:
        caption = section(prompt.text, "Caption")
        if caption is None:
            raise MalformedResponse("extraction prompt without a caption section")
        content = self.registry.get(caption.strip())
        if content is None:
            content = SemanticContent(tuple(parse_caption(caption).instances))
        return serialize_semantic_lines(content)


def _norm(text: str) -> str:
    return " ".join(text.lower().split()).rstrip(".")


def _is_negated(question: str) -> bool:
    q = _norm(question)
    return q.startswith("is it false that ") or bool(re.match(r"^(is|are) id \d+ not ", q))


def mock_negation(yes_question: str) -> str:
    """Template negation of an affirmative question."""
    q = yes_question.strip()
    m = re.match(r"^(Is|Are) (ID \d+) (.+)\?$", q)
    if m:
        return f"{m.group(1)} {m.group(2)} not {m.group(3)}?"
    m = re.match(r"^Is it true that (.+)\?$", q)
    if m:
        return f"Is it false that {m.group(1)}?"
    return f"Is it false that {q.rstrip('?')}?"


class NegationChat(ChatProvider):
    default_kind = "mock-negation"

    def _complete(self, prompt: RenderedPrompt, image: Optional[str]) -> str:
        yes_q = section(prompt.text, "Affirmative question")
        if not yes_q:
            raise MalformedResponse("question-generation prompt without an affirmative question")
        return mock_negation(yes_q.strip())


class OracleJudgeChat(ChatProvider):
    """Judges a question true iff its statement is among the caption's extracted items."""

    default_kind = "mock-oracle-judge"

    def _complete(self, prompt: RenderedPrompt, image: Optional[str]) -> str:
        from ..qa import CONTENT_MARKER, yes_question

        question = section(prompt.text, "Question")
        context = section(prompt.text, "Caption")
        if question is None or context is None:
            raise MalformedResponse("judge prompt without caption/question sections")
        facts = SemanticContent()
        if CONTENT_MARKER in context:
            try:
                facts = parse_semantic_content(context.split(CONTENT_MARKER, 1)[1])
            except (ParseError, ValueError):
                facts = SemanticContent()
        affirmative = set()
        contradicting = set()
        for item in facts.items:
            yq = yes_question(item.statement)
            affirmative.add(_norm(yq))
            contradicting.add(_norm(mock_negation(yq)))
        q = _norm(question)
        if q in affirmative:
            return "Yes"
        if q in contradicting:
            return "No"
        return "Yes" if _is_negated(question) else "No"


class EntityCaptionerChat(ChatProvider):
    """Writes one sentence per entity listed in an entity-aware prompt."""

    default_kind = "mock-entity-captioner"
    MARKER = "Detected entity instances (tag and box): "

    def __init__(self, profile: Optional[ProviderProfile] = None, suffix: str = ""):
        if profile is None:
            profile = ProviderProfile(name="entity-captioner", kind="mock-entity-captioner",
                                      backoff_base=0.0, multimodal=True)
        super().__init__(profile)
        self.suffix = suffix

    def _complete(self, prompt: RenderedPrompt, image: Optional[str]) -> str:
        text = prompt.text
        start = text.find(self.MARKER)
        if start < 0:
            raise MalformedResponse("prompt carries no entity list")
        line = text[start + len(self.MARKER):].split("\n", 1)[0]
        entries = parse_instance_text(line, strict=False).entries if line.strip() else ()
        sentences = [f"There is a {e.tag} {format_box(e.box)}." for e in entries]
        if self.suffix:
            sentences.append(self.suffix)
        return " ".join(sentences)
