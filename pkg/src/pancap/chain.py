"""Four-stage caption generation (localize, tag, discover, caption) and its training tuples."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Union

from .captions import (
    InstanceText,
    PanopticCaption,
    parse_caption,
    parse_instance_text,
    parse_localization_text,
    serialize_instance_text,
    serialize_localization_text,
)
from .errors import BoxError, NoInstances, ParseError, StageParseFailure
from .llm.prompts import RenderedPrompt, get_template
from .llm.providers import ChatProvider
from .matching import dedup_append
from .types import EntityInstance, EvalConfig

STAGES = ("loc", "tag", "disc", "cap")
_FORMATS = {
    1: "comma-separated boxes written as <box>[[x1, y1, x2, y2]]</box>",
    2: "comma-separated entries written as tag <box>[[x1, y1, x2, y2]]</box>",
    3: "comma-separated entries written as tag <box>[[x1, y1, x2, y2]]</box>, or nothing if no entity is missing",
    4: "the caption text, marking each entity with <box>[[x1, y1, x2, y2]]</box>",
}
_NOTHING = {"", "none", "none.", "nothing", "nothing."}


@dataclass(frozen=True)
class StageRecord:
    stage: int
    name: str
    prompt: RenderedPrompt
    reply: str
    artifact: str
    attempts: int
    seconds: float

    def to_dict(self) -> dict[str, Any]:
        return {"stage": self.stage, "name": self.name, "template": self.prompt.template_id,
                "template_version": self.prompt.version, "prompt": self.prompt.to_messages(),
                "reply": self.reply, "artifact": self.artifact, "attempts": self.attempts,
                "seconds": self.seconds}


@dataclass(frozen=True)
class ChainTrace:
    image: str
    stages: tuple[StageRecord, ...]

    def artifact(self, name: str) -> str:
        return self.stages[STAGES.index(name)].artifact

    @property
    def localization_text(self) -> str:
        return self.artifact("loc")

    @property
    def instance_text(self) -> str:
        return self.artifact("tag")

    @property
    def extra_instance_text(self) -> str:
        return self.artifact("disc")

    @property
    def caption(self) -> str:
        return self.artifact("cap")

    def to_dict(self) -> dict[str, Any]:
        return {"image": self.image, "stages": [s.to_dict() for s in self.stages]}


def _parse_boxes(reply: str):
    text = reply.strip()
    if text.lower() in _NOTHING:
        return []
    return parse_localization_text(text, strict=False)


def _parse_entries(reply: str) -> InstanceText:
    text = reply.strip()
    if text.lower() in _NOTHING:
        return InstanceText()
    return parse_instance_text(text, strict=False)


def _parse_final(reply: str) -> PanopticCaption:
    if not reply.strip():
        raise ParseError("empty caption")
    return parse_caption(reply, strict=False)


def aggregate_instances(initial: Sequence[EntityInstance], extra: Sequence[EntityInstance],
                        merge_iou: float) -> list[EntityInstance]:
    """Initial entries followed by the extra entries that do not duplicate a kept box."""
    keep = dedup_append([e.box for e in initial], [e.box for e in extra], merge_iou)
    merged = list(initial) + [extra[k] for k in keep]
    return [EntityInstance(i + 1, e.tag, e.box) for i, e in enumerate(merged)]


def run_chain(image: str, provider: ChatProvider, cfg: Optional[EvalConfig] = None,
              clock: Callable[[], float] = time.perf_counter
              ) -> tuple[PanopticCaption, ChainTrace]:
    """Run the four stages in order, threading each stage's output into the next prompt.

    A reply that fails its stage grammar gets one re-prompt with a format
    reminder; a second failure raises ``StageParseFailure``.
    """
    cfg = cfg or EvalConfig()
    image_arg = image if provider.profile.multimodal else None
    records: list[StageRecord] = []

    def stage(k: int, prompt: RenderedPrompt, parse: Callable[[str], Any]) -> Any:
        t0 = clock()
        reply = provider.chat(prompt, image_arg)
        attempts = 1
        try:
            parsed = parse(reply)
        except (ParseError, BoxError):
            reminder = get_template("chain_format_reminder").render(format=_FORMATS[k]).text
            prompt = prompt.with_user_suffix(reminder)
            reply = provider.chat(prompt, image_arg)
            attempts = 2
            try:
                parsed = parse(reply)
            except (ParseError, BoxError) as exc:
                raise StageParseFailure(k, reply, str(exc)) from exc
        if isinstance(parsed, PanopticCaption):
            artifact = parsed.render()
        elif isinstance(parsed, InstanceText):
            artifact = serialize_instance_text(parsed)
        else:
            artifact = serialize_localization_text(parsed)
        records.append(StageRecord(k, STAGES[k - 1], prompt, reply, artifact, attempts, clock() - t0))
        return parsed

    boxes = stage(1, get_template("chain_localize").render(), _parse_boxes)
    loc_text = serialize_localization_text(boxes)
    tagged: InstanceText = stage(2, get_template("chain_tag").render(boxes=loc_text), _parse_entries)
    extra: InstanceText = stage(3, get_template("chain_discover").render(
        instances=serialize_instance_text(tagged)), _parse_entries)
    merged = aggregate_instances(tagged.entries, extra.entries, cfg.merge_iou)
    caption: PanopticCaption = stage(4, get_template("chain_caption").render(
        instances=serialize_instance_text(merged)), _parse_final)
    return caption, ChainTrace(image, tuple(records))


# -- training data -----------------------------------------------------------


@dataclass(frozen=True)
class TrainingTuple:
    image: str
    prompt: str
    target: str
    stage: str

    def to_dict(self) -> dict[str, str]:
        return {"image": self.image, "prompt": self.prompt, "target": self.target, "stage": self.stage}


def split_instances(instances: Sequence[EntityInstance], seed: int, divisor: int = 3
                    ) -> tuple[list[EntityInstance], list[EntityInstance]]:
    """Split into (discovered, missing); ``max(1, n // divisor)`` instances go missing."""
    n = len(instances)
    if n < 2:
        return list(instances), []
    k = max(1, n // divisor)
    missing = set(random.Random(seed).sample(range(n), k))
    discovered = [e for i, e in enumerate(instances) if i not in missing]
    return discovered, [e for i, e in enumerate(instances) if i in missing]


def build_training_tuples(image: str, gt: Union[PanopticCaption, str], seed: int,
                          divisor: int = 3) -> list[TrainingTuple]:
    if isinstance(gt, str):
        gt = parse_caption(gt)
    instances = gt.instances
    if not instances:
        raise NoInstances("ground-truth caption has no boxed instances")
    loc_text = serialize_localization_text(e.box for e in instances)
    inst_text = serialize_instance_text(instances)
    out = [
        TrainingTuple(image, get_template("chain_localize").render().text, loc_text, "loc"),
        TrainingTuple(image, get_template("chain_tag").render(boxes=loc_text).text, inst_text, "tag"),
    ]
    discovered, missing = split_instances(instances, seed, divisor)
    if missing:
        out.append(TrainingTuple(
            image, get_template("chain_discover").render(instances=serialize_instance_text(discovered)).text,
            serialize_instance_text(missing), "disc"))
    out.append(TrainingTuple(image, get_template("chain_caption").render(instances=inst_text).text,
                             gt.render(), "cap"))
    return out
