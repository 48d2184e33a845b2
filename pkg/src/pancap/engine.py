"""Detector-region merging, entity-aware caption prompts and the cross-model consistency gate."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

from .captions import PanopticCaption, parse_caption, serialize_instance_text
from .errors import UntaggedRegion
from .evaluate import CaptionInput, Providers, evaluate_pair
from .llm.prompts import PromptTemplate, RenderedPrompt, get_template
from .llm.providers import ChatProvider
from .matching import dedup_append
from .scoring import MAX_SCORE, nonloc_score
from .types import BoundingBox, EntityInstance, EvalConfig, validate_box

log = logging.getLogger(__name__)

REGION_SOURCES = ("class-agnostic", "class-aware", "merged")


@dataclass(frozen=True)
class Region:
    """A detected box; class-agnostic detectors leave ``tag`` unset."""

    box: BoundingBox
    tag: Optional[str] = None

    def to_dict(self, index: int) -> dict[str, Any]:
        return {"id": index, "tag": self.tag, "box": self.box.as_list()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Region":
        tag = d.get("tag")
        return cls(BoundingBox.from_list(d["box"]), tag.strip() if isinstance(tag, str) and tag.strip() else None)


@dataclass(frozen=True)
class RegionSet:
    source: str
    regions: tuple[Region, ...] = ()
    image: Optional[str] = None

    def __post_init__(self) -> None:
        if self.source not in REGION_SOURCES:
            raise ValueError(f"unknown region source {self.source!r}")
        fixed = tuple(Region(validate_box(r.box, strict=False), r.tag) for r in self.regions)
        object.__setattr__(self, "regions", fixed)

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def boxes(self) -> list[BoundingBox]:
        return [r.box for r in self.regions]

    def to_dict(self) -> dict[str, Any]:
        return {"image": self.image, "source": self.source,
                "regions": [r.to_dict(i + 1) for i, r in enumerate(self.regions)]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RegionSet":
        return cls(d["source"], tuple(Region.from_dict(r) for r in d.get("regions", [])), d.get("image"))


def load_region_sets(path: Union[str, Path]) -> list[RegionSet]:
    """Region sets from a JSON object, a JSON array or JSON lines."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data: Any = json.loads(text)
    except json.JSONDecodeError:
        data = [json.loads(line) for line in text.splitlines() if line.strip()]
    if isinstance(data, dict):
        data = [data]
    return [RegionSet.from_dict(d) for d in data]


def merge_regions(r: RegionSet, r_prime: RegionSet, merge_iou: float = 0.5) -> RegionSet:
    """All of ``r``, then the regions of ``r_prime`` that overlap no kept region.

    A candidate is admitted when its IoU against every region of ``r`` and
    every previously admitted candidate is below ``merge_iou``.
    """
    admitted = dedup_append(r.boxes, r_prime.boxes, merge_iou)
    regions = r.regions + tuple(r_prime.regions[k] for k in admitted)
    return RegionSet("merged", regions, r.image or r_prime.image)


def build_entity_prompt(regions: RegionSet, template: Optional[PromptTemplate] = None) -> RenderedPrompt:
    template = template or get_template("engine_caption")
    untagged = [i + 1 for i, r in enumerate(regions.regions) if r.tag is None]
    if untagged:
        raise UntaggedRegion(f"regions {untagged} have no semantic tag")
    if not regions.regions:
        warnings.warn("entity-aware prompt built from an empty region set", stacklevel=2)
    entries = [EntityInstance(i + 1, r.tag, r.box) for i, r in enumerate(regions.regions)]
    return template.render(instances=serialize_instance_text(entries))


def consistency_filter(cap_a: CaptionInput, cap_b: CaptionInput, cfg: EvalConfig,
                       providers: Providers, caption_id: Optional[str] = None) -> tuple[bool, float]:
    """Score ``cap_a`` against ``cap_b`` without the location term; keep when normalized score clears the bar."""
    report = evaluate_pair(cap_a, cap_b, cfg, providers, caption_id)
    score = nonloc_score(report.tag.f1, report.att.f1, report.rel.f1, report.glo.f1, cfg.lambda_g)
    ceiling = 3 * MAX_SCORE + cfg.lambda_g * MAX_SCORE
    return score / ceiling >= cfg.consistency_drop, score


@dataclass(frozen=True)
class EngineRecord:
    image: Optional[str]
    caption: str
    nonloc_score: float
    kept: bool
    reference_caption: str
    reverse_nonloc_score: float

    def to_dict(self) -> dict[str, Any]:
        return {"image": self.image, "caption": self.caption, "nonloc_score": self.nonloc_score,
                "kept": self.kept, "reference_caption": self.reference_caption,
                "reverse_nonloc_score": self.reverse_nonloc_score}


def run_engine(r: RegionSet, r_prime: RegionSet, captioner: ChatProvider, checker: ChatProvider,
               cfg: EvalConfig, providers: Providers) -> EngineRecord:
    """Merge, caption with two models and gate the first model's caption on the second's.

    A caption that fails the gate drops the whole pair; both directional
    scores are recorded either way.
    """
    merged = merge_regions(r, r_prime, cfg.merge_iou)
    prompt = build_entity_prompt(merged)
    image = merged.image

    def generate(provider: ChatProvider) -> PanopticCaption:
        reply = provider.chat(prompt, image if provider.profile.multimodal and image else None)
        return parse_caption(reply, strict=False)

    cap_a, cap_b = generate(captioner), generate(checker)
    kept, forward = consistency_filter(cap_a, cap_b, cfg, providers, image)
    _, reverse = consistency_filter(cap_b, cap_a, cfg, providers, image)
    if not kept:
        log.info("dropping caption pair for %s (non-location score %.2f)", image, forward)
    return EngineRecord(image, cap_a.raw_text, forward, kept, cap_b.raw_text, reverse)

