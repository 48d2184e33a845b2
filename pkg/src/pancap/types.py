"""Domain types shared across pancap.

All types are frozen dataclasses; collections are stored as tuples so values
can be shared between worker threads without copying.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable, Literal, Optional

from .errors import DanglingReference, DegenerateBox, DuplicateInstanceId, OutOfRange

COORD_LIMIT = 1000  # coordinates live in [0, COORD_LIMIT)

Dimension = Literal["attribute", "relation", "global"]
DIMENSIONS: tuple[str, ...] = ("attribute", "relation", "global")
SCORE_DIMENSIONS: tuple[str, ...] = ("tag", "loc", "att", "rel", "glo")


@dataclass(frozen=True)
class BoundingBox:
    x1: int
    y1: int
    x2: int
    y2: int

    def as_list(self) -> list[int]:
        return [self.x1, self.y1, self.x2, self.y2]

    @classmethod
    def from_list(cls, coords: Iterable[Any]) -> "BoundingBox":
        values = list(coords)
        if len(values) != 4:
            raise ValueError(f"a box needs 4 coordinates, got {len(values)}")
        out = []
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                raise ValueError(f"box coordinate {v!r} is not an integer")
            out.append(int(v))
        return cls(*out)


def validate_box(b: BoundingBox, strict: bool = True) -> BoundingBox:
    """Check ``b`` against the normalized-coordinate invariants.

    In strict mode the box is returned unchanged or an error is raised. In
    lenient mode coordinates are clamped into ``[0, 999]`` and inverted
    corners are swapped; only a box that still has zero area is rejected.
    """
    coords = (b.x1, b.y1, b.x2, b.y2)
    if strict:
        if any(c < 0 or c >= COORD_LIMIT for c in coords):
            raise OutOfRange(f"box {list(coords)} leaves [0, {COORD_LIMIT})")
        if b.x1 >= b.x2 or b.y1 >= b.y2:
            raise DegenerateBox(f"box {list(coords)} has no area")
        return b
    x1, y1, x2, y2 = (min(max(c, 0), COORD_LIMIT - 1) for c in coords)
    x1, x2 = min(x1, x2), max(x1, x2)
    y1, y2 = min(y1, y2), max(y1, y2)
    if x1 == x2 or y1 == y2:
        raise DegenerateBox(f"box {list(coords)} has no area after repair")
    repaired = BoundingBox(x1, y1, x2, y2)
    return b if repaired == b else repaired


def box_area(b: BoundingBox) -> int:
    return (b.x2 - b.x1) * (b.y2 - b.y1)


@dataclass(frozen=True)
class EntityInstance:
    id: int
    tag: str
    box: BoundingBox

    def __post_init__(self) -> None:
        if isinstance(self.id, bool) or not isinstance(self.id, int) or self.id < 1:
            raise ValueError(f"instance id must be a positive integer, got {self.id!r}")
        if not isinstance(self.tag, str) or not self.tag.strip():
            raise ValueError("instance tag must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "tag": self.tag, "box": self.box.as_list()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EntityInstance":
        return cls(id=d["id"], tag=d["tag"], box=BoundingBox.from_list(d["box"]))


@dataclass(frozen=True)
class SemanticItem:
    """One attribute, relation or global-state statement.

    ``text`` is the predicate for instance-bound items ("is brown",
    "is lying on ID 2") and the full statement for global items.
    """

    dimension: str
    subject_id: Optional[int]
    text: str
    object_id: Optional[int] = None

    def __post_init__(self) -> None:
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown item dimension {self.dimension!r}")
        if (self.dimension == "global") != (self.subject_id is None):
            raise ValueError("global items have no subject; all other items need one")
        if self.object_id is not None and self.dimension != "relation":
            raise ValueError("only relation items may carry an object id")
        if not self.text.strip():
            raise ValueError("item text must be non-empty")

    @property
    def statement(self) -> str:
        if self.subject_id is None:
            return self.text
        return f"ID {self.subject_id} {self.text}"

    def to_dict(self) -> dict[str, Any]:
        return {"dim": self.dimension, "subject": self.subject_id,
                "object": self.object_id, "text": self.text}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SemanticItem":
        return cls(dimension=d["dim"], subject_id=d.get("subject"),
                   text=d["text"], object_id=d.get("object"))


@dataclass(frozen=True)
class SemanticContent:
    instances: tuple[EntityInstance, ...] = ()
    items: tuple[SemanticItem, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "items", tuple(self.items))
        seen: set[int] = set()
        for inst in self.instances:
            if inst.id in seen:
                raise DuplicateInstanceId(f"instance id {inst.id} appears twice")
            seen.add(inst.id)
        for item in self.items:
            for ref in (item.subject_id, item.object_id):
                if ref is not None and ref not in seen:
                    raise DanglingReference(f"item {item.statement!r} refers to missing instance {ref}")

    def instance(self, instance_id: int) -> EntityInstance:
        for inst in self.instances:
            if inst.id == instance_id:
                return inst
        raise KeyError(instance_id)

    def items_of(self, dimension: str) -> list[SemanticItem]:
        return [it for it in self.items if it.dimension == dimension]

    def to_dict(self) -> dict[str, Any]:
        return {"instances": [i.to_dict() for i in self.instances],
                "items": [it.to_dict() for it in self.items]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SemanticContent":
        return cls(instances=tuple(EntityInstance.from_dict(i) for i in d.get("instances", [])),
                   items=tuple(SemanticItem.from_dict(i) for i in d.get("items", [])))


@dataclass(frozen=True)
class MatchedPair:
    gt_index: int
    pred_index: int
    gt_id: int
    pred_id: int
    similarity: float
    iou: float
    tag_consistent: bool
    loc_consistent: bool

    def __post_init__(self) -> None:
        if self.loc_consistent and not self.tag_consistent:
            raise ValueError("a location-consistent pair must also be tag-consistent")


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[MatchedPair, ...] = ()
    unmatched_gt: tuple[int, ...] = ()
    unmatched_pred: tuple[int, ...] = ()
    objective: float = 0.0

    def __post_init__(self) -> None:
        gts = [p.gt_index for p in self.pairs]
        preds = [p.pred_index for p in self.pairs]
        if len(set(gts)) != len(gts) or len(set(preds)) != len(preds):
            raise ValueError("match is not one-to-one")

    def id_map(self, direction: str) -> dict[int, int]:
        """Instance-id mapping; ``direction`` is ``"pred->ref"`` or ``"ref->pred"``."""
        if direction == "pred->ref":
            return {p.pred_id: p.gt_id for p in self.pairs}
        if direction == "ref->pred":
            return {p.gt_id: p.pred_id for p in self.pairs}
        raise ValueError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class DimensionScore:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DimensionScore":
        return cls(precision=d["precision"], recall=d["recall"], f1=d["f1"])


@dataclass(frozen=True)
class DimensionCounts:
    """Raw counts behind a DimensionScore, kept for pooled corpus statistics."""

    pred_correct: int
    pred_total: int
    ref_correct: int
    ref_total: int

    def to_dict(self) -> dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class PancapReport:
    tag: DimensionScore
    loc: DimensionScore
    att: DimensionScore
    rel: DimensionScore
    glo: DimensionScore
    overall: float
    counts: dict[str, DimensionCounts] = field(default_factory=dict, compare=False)

    def scores(self) -> dict[str, DimensionScore]:
        return {name: getattr(self, name) for name in SCORE_DIMENSIONS}

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {name: s.to_dict() for name, s in self.scores().items()}
        out["overall"] = self.overall
        if self.counts:
            out["counts"] = {k: v.to_dict() for k, v in self.counts.items()}
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PancapReport":
        counts = {k: DimensionCounts(**v) for k, v in d.get("counts", {}).items()}
        return cls(**{name: DimensionScore.from_dict(d[name]) for name in SCORE_DIMENSIONS},
                   overall=d["overall"], counts=counts)


@dataclass(frozen=True)
class EvalConfig:
    mu: float = 10.0
    delta_t: float = 0.5
    delta_l: float = 0.5
    lambda_g: float = 0.1
    merge_iou: float = 0.5
    consistency_drop: float = 0.5
    strict_parse: bool = False

    def __post_init__(self) -> None:
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError("mu must be positive")
        for name in ("delta_t", "delta_l", "merge_iou", "consistency_drop"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not self.lambda_g >= 0:
            raise ValueError("lambda_g must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EvalConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)
