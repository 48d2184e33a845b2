"""Prompt templates shipped as versioned JSON data files.

Placeholders use ``string.Template`` syntax (``${name}``) so that literal
braces in in-context JSON examples need no escaping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Any, Mapping

from ..errors import TemplateError


@dataclass(frozen=True)
class RenderedPrompt:
    template_id: str
    version: str
    messages: tuple[tuple[str, str], ...]

    @property
    def text(self) -> str:
        """Content of the last user message."""
        for role, content in reversed(self.messages):
            if role == "user":
                return content
        return self.messages[-1][1] if self.messages else ""

    def to_messages(self) -> list[dict[str, str]]:
        return [{"role": r, "content": c} for r, c in self.messages]

    def with_user_suffix(self, suffix: str) -> "RenderedPrompt":
        msgs = list(self.messages)
        for k in range(len(msgs) - 1, -1, -1):
            if msgs[k][0] == "user":
                msgs[k] = ("user", msgs[k][1] + suffix)
                break
        return RenderedPrompt(self.template_id, self.version, tuple(msgs))

    @classmethod
    def from_text(cls, text: str) -> "RenderedPrompt":
        return cls("raw", "0", (("user", text),))


def _placeholders(text: str) -> set[str]:
    names = set()
    for m in Template.pattern.finditer(text):
        name = m.group("named") or m.group("braced")
        if name:
            names.add(name)
        elif m.group("invalid") is not None:
            raise TemplateError(f"invalid placeholder near {text[m.start():m.start() + 20]!r}")
    return names


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    version: str
    messages: tuple[tuple[str, str], ...]
    examples: str = ""
    defaults: Mapping[str, str] = field(default_factory=dict)
    reconstructed: bool = False

    @property
    def placeholders(self) -> set[str]:
        out: set[str] = set()
        for _, content in self.messages:
            out |= _placeholders(content)
        return out

    def render(self, **values: Any) -> RenderedPrompt:
        env = {"examples": self.examples, **self.defaults, **{k: str(v) for k, v in values.items()}}
        missing = sorted(self.placeholders - set(env))
        if missing:
            raise TemplateError(f"template {self.id!r} has unfilled placeholders: {missing}")
        rendered = tuple((role, Template(content).substitute(env)) for role, content in self.messages)
        return RenderedPrompt(self.id, self.version, rendered)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PromptTemplate":
        msgs = tuple((m["role"], m["content"]) for m in d["messages"])
        return cls(id=d["id"], version=str(d["version"]), messages=msgs,
                   examples=d.get("examples", ""), defaults=dict(d.get("defaults", {})),
                   reconstructed=bool(d.get("reconstructed", False)))


@lru_cache(maxsize=None)
def _builtin() -> dict[str, PromptTemplate]:
    out = {}
    for entry in resources.files("pancap.llm").joinpath("templates").iterdir():
        if entry.name.endswith(".json"):
            tpl = PromptTemplate.from_dict(json.loads(entry.read_text(encoding="utf-8")))
            out[tpl.id] = tpl
    return out


def get_template(template_id: str) -> PromptTemplate:
    try:
        return _builtin()[template_id]
    except KeyError:
        raise TemplateError(f"no prompt template named {template_id!r}") from None


def template_versions() -> dict[str, str]:
    return {k: v.version for k, v in sorted(_builtin().items())}
