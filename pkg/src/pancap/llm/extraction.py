from __future__ import annotations

import logging
from typing import Optional

from ..captions import parse_semantic_content
from ..errors import (
    DanglingReference,
    DuplicateInstanceId,
    ExtractionFailed,
    ParseError,
    ProviderError,
)
from ..types import SemanticContent
from .prompts import get_template
from .providers import ChatProvider

log = logging.getLogger(__name__)

_PARSE_ERRORS = (ParseError, DanglingReference, DuplicateInstanceId, ValueError)


def extract_semantic_content(caption: str, provider: ChatProvider,
                             caption_id: Optional[str] = None) -> SemanticContent:
    """Ask ``provider`` for the semantic content of ``caption``.

    A reply that fails to parse gets exactly one repair prompt quoting the
    parse error; a second failure raises ``ExtractionFailed``.
    """
    if not caption.strip():
        return SemanticContent()
    prompt = get_template("extraction").render(caption=caption)
    try:
        reply = provider.chat(prompt)
        try:
            return parse_semantic_content(reply)
        except _PARSE_ERRORS as first:
            log.info("extraction reply for %s did not parse (%s); repairing", caption_id, first)
            repair = get_template("extraction_repair").render(caption=caption, reply=reply,
                                                              error=str(first))
            reply = provider.chat(repair)
            try:
                return parse_semantic_content(reply)
            except _PARSE_ERRORS as second:
                raise ExtractionFailed(f"unparseable extraction after repair: {second}",
                                       caption_id) from second
    except ProviderError as exc:
        raise ExtractionFailed(f"extraction provider failed: {exc}", caption_id) from exc
