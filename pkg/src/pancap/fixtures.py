"""Synthetic scenes, corruption helpers and the checked-in golden corpus.

Each scene is written as structured content and rendered into a caption, so
the oracle extractor can return the content exactly when it sees the
caption text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .captions import format_box
from .matching import SynonymLexicon, iou
from .types import COORD_LIMIT, BoundingBox, EntityInstance, SemanticContent, SemanticItem

Box = tuple[int, int, int, int]


@dataclass(frozen=True)
class Scene:
    id: str
    instances: tuple[tuple[str, Box], ...]
    attributes: tuple[tuple[int, str], ...] = ()
    relations: tuple[tuple[int, str, int], ...] = ()  # predicate mentions "ID {object}"
    globals: tuple[str, ...] = ()

    def content(self) -> SemanticContent:
        inst = tuple(EntityInstance(i + 1, tag, BoundingBox(*box)) for i, (tag, box) in enumerate(self.instances))
        items = [SemanticItem("attribute", s, text) for s, text in self.attributes]
        items += [SemanticItem("relation", s, text, o) for s, text, o in self.relations]
        items += [SemanticItem("global", None, g) for g in self.globals]
        return SemanticContent(inst, tuple(items))


SCENES: tuple[Scene, ...] = (
    Scene("kitchen-01", (("cat", (120, 300, 420, 700)), ("table", (50, 500, 950, 990)), ("mug", (600, 380, 720, 520))),
          ((1, "is orange"), (1, "has striped fur"), (3, "is white")),
          ((1, "is sitting on ID 2", 2), (3, "is on ID 2", 2)), ("the light is soft daylight",)),
    Scene("street-02", (("car", (40, 520, 460, 820)), ("person", (600, 300, 720, 900)), ("traffic light", (800, 40, 860, 260))),
          ((1, "is red"), (2, "is wearing a blue coat"), (3, "is green")),
          ((2, "is walking past ID 1", 1),), ("the street is wet after rain", "the sky is overcast")),
    Scene("park-03", (("dog", (200, 450, 520, 800)), ("frisbee", (580, 300, 680, 360)), ("tree", (700, 0, 999, 700))),
          ((1, "is brown"), (2, "is yellow")),
          ((1, "is chasing ID 2", 2), (2, "is in front of ID 3", 3)), ("the scene is sunny",)),
    Scene("office-04", (("laptop", (300, 400, 650, 650)), ("desk", (0, 600, 999, 999)), ("lamp", (760, 100, 900, 600)), ("plant", (60, 250, 220, 620))),
          ((1, "is silver"), (3, "is switched on"), (4, "is green")),
          ((1, "is on ID 2", 2), (3, "stands beside ID 1", 1)), ("the room is lit by warm lamp light",)),
    Scene("beach-05", (("umbrella", (100, 100, 500, 500)), ("towel", (150, 700, 550, 820)), ("ball", (700, 720, 780, 800))),
          ((1, "is striped"), (2, "is blue"), (3, "is inflatable")),
          ((2, "lies under ID 1", 1),), ("the sea is calm", "the palette is bright")),
    Scene("bedroom-06", (("bed", (50, 400, 800, 950)), ("pillow", (100, 420, 300, 520)), ("window", (600, 50, 950, 380))),
          ((1, "is unmade"), (2, "is white")),
          ((2, "rests on ID 1", 1),), ("the atmosphere is calm",)),
    Scene("market-07", (("stall", (0, 200, 600, 900)), ("apple", (150, 500, 230, 580)), ("vendor", (620, 250, 800, 950)), ("awning", (0, 100, 620, 260))),
          ((2, "is red"), (3, "is smiling"), (4, "is green")),
          ((2, "is displayed on ID 1", 1), (3, "stands next to ID 1", 1)), ("the market is busy",)),
    Scene("lake-08", (("boat", (300, 500, 600, 650)), ("lake", (0, 450, 999, 999)), ("mountain", (0, 0, 999, 450))),
          ((1, "is wooden"), (3, "is snow-capped")),
          ((1, "floats on ID 2", 2), (3, "is behind ID 2", 2)), ("the water is mirror-like", "the light is early morning")),
    Scene("cafe-09", (("cup", (400, 500, 500, 620)), ("saucer", (370, 600, 530, 650)), ("croissant", (600, 540, 780, 640))),
          ((1, "is ceramic"), (3, "is golden")),
          ((1, "sits on ID 2", 2),), ("the tones are warm",)),
    Scene("garage-10", (("bicycle", (100, 300, 600, 800)), ("helmet", (650, 200, 800, 320)), ("shelf", (620, 100, 990, 700))),
          ((1, "is black"), (2, "is orange")),
          ((2, "is on ID 3", 3),), ("the garage is dim",)),
    Scene("farm-11", (("horse", (100, 250, 550, 800)), ("fence", (0, 600, 999, 800)), ("barn", (600, 50, 990, 600))),
          ((1, "is chestnut"), (3, "is red")),
          ((1, "stands in front of ID 2", 2), (3, "is behind ID 2", 2)), ("the field is green", "the weather is clear")),
    Scene("library-12", (("bookshelf", (0, 0, 500, 999)), ("reader", (550, 300, 800, 900)), ("chair", (520, 500, 850, 990))),
          ((1, "is full"), (2, "is reading a novel")),
          ((2, "sits on ID 3", 3),), ("the room is quiet",)),
    Scene("harbor-13", (("ship", (100, 300, 800, 700)), ("crane", (820, 0, 990, 600)), ("seagull", (300, 100, 360, 150))),
          ((1, "is large"), (2, "is yellow"), (3, "is flying")),
          ((3, "is above ID 1", 1),), ("the sky is hazy",)),
    Scene("studio-14", (("guitar", (200, 200, 400, 900)), ("amplifier", (500, 600, 800, 950)), ("microphone", (440, 150, 480, 600))),
          ((1, "is acoustic"), (2, "is black")),
          ((1, "leans against ID 2", 2),), ("the light is dim and moody",)),
    Scene("garden-15", (("rose", (300, 300, 400, 400)), ("watering can", (600, 600, 800, 850)), ("bench", (0, 550, 500, 900))),
          ((1, "is pink"), (2, "is metal")),
          ((2, "is beside ID 3", 3),), ("the garden is in bloom",)),
    Scene("station-16", (("train", (0, 350, 700, 800)), ("platform", (0, 780, 999, 999)), ("clock", (800, 100, 900, 200)), ("passenger", (750, 450, 850, 900))),
          ((1, "is blue"), (3, "is round"), (4, "carries a suitcase")),
          ((1, "is next to ID 2", 2), (4, "stands on ID 2", 2)), ("the station is crowded",)),
    Scene("snow-17", (("snowman", (300, 300, 600, 900)), ("child", (650, 500, 800, 950)), ("sled", (50, 800, 300, 900))),
          ((1, "has a carrot nose"), (2, "is wearing a red hat")),
          ((2, "is looking at ID 1", 1),), ("the ground is covered in snow", "the light is bright")),
    Scene("desk-18", (("keyboard", (200, 600, 700, 750)), ("monitor", (250, 100, 750, 550)), ("mouse", (750, 620, 820, 700))),
          ((1, "is mechanical"), (2, "is turned off")),
          ((1, "is below ID 2", 2), (3, "is right of ID 1", 1)), ("the scene is tidy",)),
    Scene("zoo-19", (("giraffe", (100, 0, 400, 900)), ("zebra", (500, 500, 850, 900)), ("rock", (400, 800, 600, 999))),
          ((1, "is tall"), (2, "is striped")),
          ((2, "stands near ID 3", 3),), ("the savanna is dry",)),
    Scene("living-20", (("sofa", (50, 400, 700, 850)), ("television", (720, 200, 990, 500)), ("rug", (100, 800, 900, 999)), ("cushion", (100, 420, 250, 550))),
          ((1, "is grey"), (3, "is patterned"), (4, "is yellow")),
          ((4, "lies on ID 1", 1), (1, "faces ID 2", 2), (3, "is under ID 1", 1)), ("the room is cosy",)),
    Scene("airport-21", (("airplane", (50, 200, 950, 600)), ("runway", (0, 600, 999, 999))),
          ((1, "is white"),),
          ((1, "is taking off from ID 2", 2),), ("the sky is clear",)),
    Scene("empty-22", (("wall", (0, 0, 999, 999)),), ((1, "is painted beige"),), (), ()),
)

LEXICON = SynonymLexicon({
    "dog": ["puppy", "hound"],
    "car": ["automobile"],
    "sofa": ["couch"],
    "person": ["pedestrian"],
    "cup": ["mug"],
    "television": ["tv"],
})


# -- caption rendering ---------------------------------------------------------


def _article(tag: str) -> str:
    return "an" if tag[0].lower() in "aeiou" else "a"


def render_caption(content: SemanticContent) -> str:
    """A plain caption carrying every instance with box markup and every item as a sentence."""
    tags = {inst.id: inst.tag for inst in content.instances}

    def name(text: str) -> str:
        return re.sub(r"\bID (\d+)\b", lambda m: f"the {tags[int(m.group(1))]}", text)

    sentences = [f"There is {_article(inst.tag)} {inst.tag} {format_box(inst.box)}."
                 for inst in content.instances]
    for item in content.items:
        if item.subject_id is None:
            sentences.append(item.text[0].upper() + item.text[1:] + ".")
        else:
            sentences.append(f"The {tags[item.subject_id]} {name(item.text)}.")
    return " ".join(sentences)


def caption_entry(content: SemanticContent) -> dict[str, Any]:
    """Batch-input form: caption text plus its pre-extracted content."""
    return {"caption": render_caption(content), "content": content.to_dict()}


# -- corruptions ---------------------------------------------------------------


def _renumber(instances: list[EntityInstance], items: list[SemanticItem]) -> SemanticContent:
    new_id = {inst.id: k + 1 for k, inst in enumerate(instances)}
    inst = tuple(EntityInstance(new_id[i.id], i.tag, i.box) for i in instances)
    moved = []
    for it in items:
        text = re.sub(r"\bID (\d+)\b", lambda m: f"ID {new_id[int(m.group(1))]}", it.text)
        moved.append(SemanticItem(it.dimension, None if it.subject_id is None else new_id[it.subject_id],
                                  text, None if it.object_id is None else new_id[it.object_id]))
    return SemanticContent(inst, tuple(moved))


def delete_instance(content: SemanticContent, instance_id: int) -> SemanticContent:
    """Drop an instance together with every item that mentions it."""
    gone = {instance_id}
    instances = [i for i in content.instances if i.id not in gone]
    items = [it for it in content.items
             if it.subject_id not in gone and it.object_id not in gone
             and f"ID {instance_id}" not in re.findall(r"\bID \d+\b", it.text)]
    return _renumber(instances, items)


def shifted_box(box: BoundingBox, max_iou: float) -> BoundingBox:
    """A box of similar size whose IoU with ``box`` is below ``max_iou``."""
    w, h = box.x2 - box.x1, box.y2 - box.y1
    limit = COORD_LIMIT - 1
    candidates = [
        BoundingBox(box.x2, box.y1, min(limit, box.x2 + w), box.y2),
        BoundingBox(max(0, box.x1 - w), box.y1, box.x1, box.y2),
        BoundingBox(box.x1, box.y2, box.x2, min(limit, box.y2 + h)),
        BoundingBox(box.x1, max(0, box.y1 - h), box.x2, box.y1),
    ]
    for c in candidates:
        if c.x2 > c.x1 and c.y2 > c.y1 and iou(c, box) < max_iou:
            return c
    # Full-frame boxes leave no room to move: shrink to a corner instead.
    shrunk = BoundingBox(box.x1, box.y1, box.x1 + max(1, w // 4), box.y1 + max(1, h // 4))
    assert iou(shrunk, box) < max_iou
    return shrunk


def shift_box(content: SemanticContent, instance_id: int, max_iou: float = 0.5) -> SemanticContent:
    insts = tuple(EntityInstance(i.id, i.tag, shifted_box(i.box, max_iou)) if i.id == instance_id else i
                  for i in content.instances)
    return SemanticContent(insts, content.items)


def negate_predicate(text: str) -> str:
    for verb, neg in (("is ", "is not "), ("are ", "are not "), ("has ", "does not have ")):
        if text.startswith(verb):
            return neg + text[len(verb):]
    return "does not " + text


def negate_attribute(content: SemanticContent, position: int = 0) -> SemanticContent:
    """Negate the ``position``-th attribute item."""
    attrs = [k for k, it in enumerate(content.items) if it.dimension == "attribute"]
    if not attrs:
        raise ValueError("content has no attribute item to negate")
    k = attrs[position]
    items = list(content.items)
    it = items[k]
    items[k] = SemanticItem(it.dimension, it.subject_id, negate_predicate(it.text), it.object_id)
    return SemanticContent(content.instances, tuple(items))


def rename_tag(content: SemanticContent, instance_id: int, tag: str) -> SemanticContent:
    insts = tuple(EntityInstance(i.id, tag, i.box) if i.id == instance_id else i for i in content.instances)
    return SemanticContent(insts, content.items)


def add_instance(content: SemanticContent, tag: str, box: Box,
                 attributes: tuple[str, ...] = ()) -> SemanticContent:
    new_id = max((i.id for i in content.instances), default=0) + 1
    inst = content.instances + (EntityInstance(new_id, tag, BoundingBox(*box)),)
    items = content.items + tuple(SemanticItem("attribute", new_id, a) for a in attributes)
    return SemanticContent(inst, items)


def add_global(content: SemanticContent, statement: str) -> SemanticContent:
    return SemanticContent(content.instances, content.items + (SemanticItem("global", None, statement),))


# -- golden-01 -----------------------------------------------------------------

GOLDEN_REFERENCE = SemanticContent(
    (EntityInstance(1, "dog", BoundingBox(100, 200, 500, 600)),
     EntityInstance(2, "mat", BoundingBox(50, 550, 950, 900)),
     EntityInstance(3, "window", BoundingBox(600, 50, 950, 400))),
    (SemanticItem("attribute", 1, "is brown"),
     SemanticItem("attribute", 2, "is red"),
     SemanticItem("relation", 1, "is lying on ID 2", 2),
     SemanticItem("global", None, "the lighting is warm")),
)

GOLDEN_PREDICTION = SemanticContent(
    (EntityInstance(1, "puppy", BoundingBox(110, 210, 500, 600)),
     EntityInstance(2, "mat", BoundingBox(50, 800, 950, 900)),
     EntityInstance(3, "cat", BoundingBox(600, 50, 950, 400)),
     EntityInstance(4, "lamp", BoundingBox(10, 10, 60, 60))),
    (SemanticItem("attribute", 1, "is brown"),
     SemanticItem("attribute", 2, "is blue"),
     SemanticItem("attribute", 4, "is bright"),
     SemanticItem("relation", 1, "is lying on ID 2", 2),
     SemanticItem("global", None, "the lighting is warm"),
     SemanticItem("global", None, "the scene is indoors")),
)


# -- corpus --------------------------------------------------------------------


def prediction_for(scene: Scene, index: int) -> SemanticContent:
    """A deterministic imperfect prediction; the corruption cycles with ``index``."""
    ref = scene.content()
    kind = index % 6
    if kind == 0:
        return ref
    if kind == 1:
        return delete_instance(ref, len(ref.instances)) if len(ref.instances) > 1 else ref
    if kind == 2:
        return shift_box(ref, 1)
    if kind == 3:
        return negate_attribute(ref) if ref.items_of("attribute") else ref
    if kind == 4:
        return add_global(add_instance(ref, "shadow", (0, 900, 200, 999), ("is long",)), "the image is grainy")
    out = rename_tag(ref, 1, "object")
    return negate_attribute(out, -1) if out.items_of("attribute") else out


RATINGS: tuple[tuple[float, float], ...] = (
    (120.5, 2.0), (175.3, 4.0), (98.2, 1.5), (210.0, 4.5), (150.1, 3.0),
    (188.7, 3.5), (131.4, 3.0), (240.9, 5.0), (105.6, 2.0), (160.0, 3.5),
)


@dataclass
class Corpus:
    scenes: tuple[Scene, ...] = SCENES
    lexicon: SynonymLexicon = field(default_factory=lambda: LEXICON)

    def pairs(self) -> list[tuple[str, SemanticContent, SemanticContent]]:
        return [(s.id, prediction_for(s, k), s.content()) for k, s in enumerate(self.scenes)]


def _write_jsonl(path: Path, rows: list[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def _write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def region_sets_for(scene: Scene) -> tuple[dict[str, Any], dict[str, Any]]:
    """Detector-style region files: class-agnostic boxes (tagged) and class-aware boxes.

    The class-aware set repeats the first box, so merging must drop it, and
    adds one new region.
    """
    image = f"images/{scene.id}.jpg"
    agnostic = [{"id": k + 1, "tag": tag, "box": list(box)} for k, (tag, box) in enumerate(scene.instances)]
    first_tag, first_box = scene.instances[0]
    aware = [{"id": 1, "tag": first_tag, "box": list(first_box)},
             {"id": 2, "tag": "sign", "box": [900, 900, 990, 990]}]
    return ({"image": image, "source": "class-agnostic", "regions": agnostic},
            {"image": image, "source": "class-aware", "regions": aware})


def emit_corpus(out_dir: Union[str, Path], corpus: Optional[Corpus] = None) -> list[Path]:
    """Write the fixture corpus; returns the written paths."""
    corpus = corpus or Corpus()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    pairs = corpus.pairs()
    _write_jsonl(out / "pred.jsonl", [{"id": i, "prediction": caption_entry(p)} for i, p, _ in pairs])
    _write_jsonl(out / "ref.jsonl", [{"id": i, "reference": caption_entry(r)} for i, _, r in pairs])
    _write_json(out / "lexicon.json", corpus.lexicon.to_dict())
    _write_json(out / "config.json", {"eval": {}, "lexicon": "lexicon.json"})
    written += [out / "pred.jsonl", out / "ref.jsonl", out / "lexicon.json", out / "config.json"]

    golden = out / "golden-01"
    golden.mkdir(exist_ok=True)
    _write_jsonl(golden / "pred.jsonl", [{"id": "golden-01", "prediction": caption_entry(GOLDEN_PREDICTION)}])
    _write_jsonl(golden / "ref.jsonl", [{"id": "golden-01", "reference": caption_entry(GOLDEN_REFERENCE)}])
    _write_json(golden / "lexicon.json", SynonymLexicon({"dog": ["puppy"]}).to_dict())
    _write_json(golden / "config.json", {"eval": {}, "lexicon": "lexicon.json"})
    written += [golden / n for n in ("pred.jsonl", "ref.jsonl", "lexicon.json", "config.json")]

    _write_jsonl(out / "ratings.jsonl", [{"machine_score": m, "human_rating": h} for m, h in RATINGS])
    written.append(out / "ratings.jsonl")

    agnostic, aware = zip(*(region_sets_for(s) for s in corpus.scenes))
    _write_json(out / "regions-agnostic.json", list(agnostic))
    _write_json(out / "regions-aware.json", list(aware))
    written += [out / "regions-agnostic.json", out / "regions-aware.json"]
    return written
