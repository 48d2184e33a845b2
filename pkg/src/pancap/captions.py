"""Parsing and serialization of the panoptic-caption text formats.

Four formats are handled here:

* box markup, ``<box>[[x1, y1, x2, y2]]</box>`` (single brackets accepted on input);
* localization text, comma-joined box markups;
* instance text, comma-joined ``tag <box>[[...]]</box>`` entries;
* semantic content, either the canonical JSON document or the line-oriented
  item list an extraction model replies with.

Output always uses the canonical double-bracket markup with ``, `` separators.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Union

from .errors import (
    BoxError,
    DegenerateBox,
    EmptyTag,
    MalformedBox,
    ParseError,
)
from .types import BoundingBox, EntityInstance, SemanticContent, SemanticItem, validate_box

log = logging.getLogger(__name__)

_TAG_TOKEN = re.compile(r"</?box>", re.IGNORECASE)
_BOX_BODY = re.compile(r"^\[\s*(\[)?([^\[\]]*?)(\])?\s*\]$")
_INT = re.compile(r"^[+-]?\d+$")
_ID_REF = re.compile(r"\bID\s*(\d+)\b")

FALLBACK_TAG = "entity"
MAX_TAG_WORDS = 6

# Words that end a tag phrase when scanning left from a box markup.
_TAG_BOUNDARY = frozenset("""
a an the this that these those some any its his her their our my your another each every
and or but nor with without by on in at near behind under over above below beside besides
between among from to into onto toward towards across against along around through
is are was were be being been has have had shows show showing features featuring
contains containing depicts depicting includes including there here where which who while
""".split())


def format_box(b: BoundingBox) -> str:
    return f"<box>[[{b.x1}, {b.y1}, {b.x2}, {b.y2}]]</box>"


def _parse_box_body(body: str, offset: int) -> BoundingBox:
    m = _BOX_BODY.match(body.strip())
    if m is None or (m.group(1) is None) != (m.group(3) is None):
        raise MalformedBox(f"unbalanced brackets in box markup {body!r}", offset)
    tokens = [t.strip() for t in m.group(2).split(",")]
    if len(tokens) != 4:
        raise MalformedBox(f"box markup needs 4 coordinates, got {len(tokens)}", offset)
    if not all(_INT.match(t) for t in tokens):
        raise MalformedBox(f"non-integer coordinate in {body!r}", offset)
    return BoundingBox(*(int(t) for t in tokens))


@dataclass(frozen=True)
class _Markup:
    start: int
    end: int
    box: BoundingBox | None  # None when the markup failed to parse
    error: Exception | None = None


def _scan_markups(text: str) -> list[_Markup]:
    """Locate every ``<box>...</box>`` region; malformed ones carry their error."""
    found: list[_Markup] = []
    open_at: int | None = None
    body_start = 0
    for tok in _TAG_TOKEN.finditer(text):
        is_open = tok.group(0)[1] != "/"
        if is_open:
            if open_at is not None:
                found.append(_Markup(open_at, tok.start(), None,
                                     MalformedBox("unclosed <box>", open_at)))
            open_at, body_start = tok.start(), tok.end()
            continue
        if open_at is None:
            found.append(_Markup(tok.start(), tok.end(), None,
                                 MalformedBox("</box> without opening tag", tok.start())))
            continue
        try:
            box = _parse_box_body(text[body_start:tok.start()], open_at)
            found.append(_Markup(open_at, tok.end(), box))
        except MalformedBox as exc:
            found.append(_Markup(open_at, tok.end(), None, exc))
        open_at = None
    if open_at is not None:
        found.append(_Markup(open_at, len(text), None, MalformedBox("unclosed <box>", open_at)))
    return found


def parse_box_markup(fragment: str, strict: bool = True) -> BoundingBox:
    markups = _scan_markups(fragment)
    if len(markups) != 1:
        raise MalformedBox(f"expected exactly one box markup, found {len(markups)}")
    mk = markups[0]
    if mk.error is not None:
        raise mk.error
    if fragment[:mk.start].strip() or fragment[mk.end:].strip():
        raise MalformedBox("unexpected text around box markup")
    assert mk.box is not None
    return validate_box(mk.box, strict=strict)


# -- captions ----------------------------------------------------------------


@dataclass(frozen=True)
class CaptionSpan:
    start: int
    end: int
    instance: EntityInstance


@dataclass(frozen=True)
class PanopticCaption:
    raw_text: str
    spans: tuple[CaptionSpan, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def instances(self) -> list[EntityInstance]:
        return [s.instance for s in self.spans]

    @property
    def prose(self) -> str:
        parts, prev = [], 0
        for s in self.spans:
            parts.append(self.raw_text[prev:s.start])
            prev = s.end
        parts.append(self.raw_text[prev:])
        return "".join(parts)

    def render(self) -> str:
        """Re-insert canonical box markup into the prose."""
        parts, prev = [], 0
        for s in self.spans:
            parts.append(self.raw_text[prev:s.start])
            parts.append(format_box(s.instance.box))
            prev = s.end
        parts.append(self.raw_text[prev:])
        return "".join(parts)


def resolve_tag(preceding: str) -> str:
    """Tag phrase immediately before a box markup, or "" when none is found."""
    i = len(preceding)
    while i > 0 and (preceding[i - 1].isalnum() or preceding[i - 1] in " -"):
        i -= 1
    words = preceding[i:].split()
    words = words[-MAX_TAG_WORDS:]
    for k in range(len(words) - 1, -1, -1):
        if words[k].lower() in _TAG_BOUNDARY:
            words = words[k + 1:]
            break
    return " ".join(w.strip("-") for w in words if w.strip("-"))


def parse_caption(text: Union[str, bytes], strict: bool = False) -> PanopticCaption:
    """Extract every boxed entity of a caption, numbering instances from 1.

    Strict mode raises on the first malformed or out-of-range markup; lenient
    mode repairs what it can and skips the rest, recording a warning.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    spans: list[CaptionSpan] = []
    warnings: list[str] = []
    for mk in _scan_markups(text):
        try:
            if mk.error is not None:
                raise mk.error
            assert mk.box is not None
            box = validate_box(mk.box, strict=strict)
        except (MalformedBox, BoxError) as exc:
            if strict:
                if isinstance(exc, ParseError):
                    raise
                raise ParseError(str(exc), mk.start) from exc
            warnings.append(f"offset {mk.start}: {exc}")
            log.warning("skipping box markup at offset %d: %s", mk.start, exc)
            continue
        tag = resolve_tag(text[:mk.start])
        if not tag:
            if strict:
                raise EmptyTag("no tag phrase precedes box markup", mk.start)
            tag = FALLBACK_TAG
        spans.append(CaptionSpan(mk.start, mk.end, EntityInstance(len(spans) + 1, tag, box)))
    return PanopticCaption(text, tuple(spans), tuple(warnings))


# -- localization and instance text -------------------------------------------


def serialize_localization_text(boxes: Iterable[BoundingBox]) -> str:
    return ", ".join(format_box(b) for b in boxes)


def parse_localization_text(text: str, strict: bool = True) -> list[BoundingBox]:
    boxes: list[BoundingBox] = []
    prev = 0
    for mk in _scan_markups(text):
        if mk.error is not None:
            raise mk.error
        gap = text[prev:mk.start].strip()
        if gap != ("," if prev > 0 else ""):
            raise ParseError(f"unexpected text {gap[:40]!r} between box markups", prev)
        prev = mk.end
        assert mk.box is not None
        try:
            boxes.append(validate_box(mk.box, strict=strict))
        except DegenerateBox:
            if strict:
                raise
            log.warning("dropping degenerate box at offset %d", mk.start)
    tail = text[prev:].strip()
    if tail and tail not in (",", "."):
        raise ParseError(f"trailing text {tail[:40]!r} after localization text", prev)
    return boxes


@dataclass(frozen=True)
class InstanceText:
    entries: tuple[EntityInstance, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)


def _canonical_tag(tag: str) -> str:
    return " ".join(tag.split())


def serialize_instance_text(entries: Union[InstanceText, Iterable[EntityInstance]]) -> str:
    items = entries.entries if isinstance(entries, InstanceText) else tuple(entries)
    out = []
    for inst in items:
        tag = _canonical_tag(inst.tag)
        if not tag:
            raise EmptyTag("instance text entries need a tag")
        if "<box>" in tag.lower() or "</box>" in tag.lower():
            raise ParseError(f"tag {tag!r} contains box markup")
        out.append(f"{tag} {format_box(inst.box)}")
    return ", ".join(out)


def parse_instance_text(text: str, strict: bool = True) -> InstanceText:
    """Parse ``tag <box>[[...]]</box>, ...``; ids are assigned 1..k in order."""
    entries: list[EntityInstance] = []
    prev = 0
    for mk in _scan_markups(text):
        if mk.error is not None:
            raise mk.error
        segment = text[prev:mk.start]
        lead = segment.lstrip()
        if prev > 0:
            if not lead.startswith(","):
                raise ParseError("instance entries must be separated by commas", prev)
            lead = lead[1:]
        tag = _canonical_tag(lead)
        if not tag:
            raise EmptyTag("instance entry without a tag", mk.start)
        prev = mk.end
        assert mk.box is not None
        try:
            box = validate_box(mk.box, strict=strict)
        except DegenerateBox:
            if strict:
                raise
            log.warning("dropping instance %r with degenerate box", tag)
            continue
        entries.append(EntityInstance(len(entries) + 1, tag, box))
    tail = text[prev:].strip()
    if tail and tail not in (",", "."):
        raise ParseError(f"trailing text {tail[:40]!r} after instance text", prev)
    return InstanceText(tuple(entries))


# -- semantic content --------------------------------------------------------

_FENCE = re.compile(r"^```[a-zA-Z]*\s*\n(.*?)\n?```\s*$", re.DOTALL)
_INSTANCE_OR_ITEM = re.compile(r"^ID\s*(\d+)\s*:\s*(.+)$", re.IGNORECASE)
_GLOBAL = re.compile(r"^global(?:\s+state)?\s*:\s*(.+)$", re.IGNORECASE)
_BULLET = re.compile(r"^(?:[-*•]\s+)")
_HEADER = re.compile(r"^\[?\s*(instances?|attributes?|relations?|global(?:\s+state)?)\s*\]?\s*:?\s*$",
                     re.IGNORECASE)


def _strip_fence(doc: str) -> str:
    m = _FENCE.match(doc.strip())
    return m.group(1) if m else doc


def parse_semantic_content(doc: Union[str, dict[str, Any]]) -> SemanticContent:
    """Parse extracted semantic content from JSON or the line-oriented item list.

    Referential integrity is enforced by :class:`SemanticContent` itself, so a
    dangling subject/object id raises ``DanglingReference``.
    """
    if isinstance(doc, dict):
        return _content_from_json(doc)
    text = _strip_fence(doc)
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.pos) from exc
        return _content_from_json(data)
    return _content_from_lines(text)


def _content_from_json(data: Any) -> SemanticContent:
    if not isinstance(data, dict):
        raise ParseError("semantic content JSON must be an object")
    try:
        instances = tuple(EntityInstance.from_dict(i) for i in data.get("instances", []))
        items = tuple(SemanticItem.from_dict(i) for i in data.get("items", []))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"bad semantic content document: {exc}") from exc
    return SemanticContent(instances, items)


def _content_from_lines(text: str) -> SemanticContent:
    instances: list[EntityInstance] = []
    items: list[SemanticItem] = []
    offset = 0
    for raw_line in text.splitlines(keepends=True):
        line_offset, offset = offset, offset + len(raw_line)
        line = _BULLET.sub("", raw_line.strip())
        if not line or _HEADER.match(line):
            continue
        g = _GLOBAL.match(line)
        if g:
            items.append(SemanticItem("global", None, g.group(1).strip()))
            continue
        m = _INSTANCE_OR_ITEM.match(line)
        if m is None:
            raise ParseError(f"unrecognised content line {line[:60]!r}", line_offset)
        subject, rest = int(m.group(1)), m.group(2).strip()
        if _TAG_TOKEN.search(rest):
            inst_text = parse_instance_text(rest, strict=False)
            if len(inst_text) != 1:
                raise ParseError(f"instance line must hold one entry: {line[:60]!r}", line_offset)
            entry = inst_text.entries[0]
            instances.append(EntityInstance(subject, entry.tag, entry.box))
            continue
        others = [int(x) for x in _ID_REF.findall(rest) if int(x) != subject]
        if others:
            items.append(SemanticItem("relation", subject, rest, object_id=others[0]))
        else:
            items.append(SemanticItem("attribute", subject, rest))
    return SemanticContent(tuple(instances), tuple(items))


def serialize_semantic_lines(content: SemanticContent) -> str:
    """Line-oriented rendering, the inverse of the line branch of the parser."""
    lines = [f"ID {inst.id}: {_canonical_tag(inst.tag)} {format_box(inst.box)}"
             for inst in content.instances]
    for item in content.items:
        if item.subject_id is None:
            lines.append(f"Global: {item.text}")
        else:
            lines.append(f"ID {item.subject_id}: {item.text}")
    return "\n".join(lines)


def rewrite_id_refs(text: str, mapping: dict[int, int]) -> tuple[str, bool]:
    """Rewrite ``ID n`` mentions through ``mapping``; the flag is False if any is unmapped."""
    ok = True

    def sub(m: re.Match[str]) -> str:
        nonlocal ok
        old = int(m.group(1))
        if old not in mapping:
            ok = False
            return m.group(0)
        return f"ID {mapping[old]}"

    return _ID_REF.sub(sub, text), ok
