from __future__ import annotations

import json
import random
import warnings

import pytest
from hypothesis import given, strategies as st

import oracles
from helpers import boxes, pre
from pancap.engine import (
    Region,
    RegionSet,
    build_entity_prompt,
    consistency_filter,
    load_region_sets,
    merge_regions,
    run_engine,
)
from pancap.errors import TemplateError, UntaggedRegion
from pancap.fixtures import SCENES, region_sets_for
from pancap.llm.mocks import EntityCaptionerChat, ScriptedChat
from pancap.llm.prompts import PromptTemplate
from pancap.types import BoundingBox, EntityInstance, EvalConfig, SemanticContent, SemanticItem


def rset(source, *specs):
    return RegionSet(source, tuple(Region(BoundingBox(*b), t) for t, b in specs))


def random_set(rng, source, n):
    out = []
    for _ in range(n):
        x, y = rng.randrange(0, 900), rng.randrange(0, 900)
        out.append(("thing", (x, y, x + rng.randrange(1, 100), y + rng.randrange(1, 100))))
    return rset(source, *out)


class TestMerge:
    def test_identical_region_excluded(self):
        r = rset("class-agnostic", ("dog", (0, 0, 100, 100)))
        rp = rset("class-aware", ("dog", (0, 0, 100, 100)))
        assert merge_regions(r, rp).regions == r.regions

    def test_disjoint_region_included(self):
        r = rset("class-agnostic", ("dog", (0, 0, 100, 100)))
        rp = rset("class-aware", ("cat", (500, 500, 600, 600)))
        merged = merge_regions(r, rp)
        assert merged.regions == r.regions + rp.regions and merged.source == "merged"

    def test_three_plus_three(self):
        r = rset("class-agnostic", ("a", (0, 0, 100, 100)), ("b", (200, 0, 300, 100)), ("c", (400, 0, 500, 100)))
        rp = rset("class-aware", ("d", (10, 10, 100, 100)), ("e", (600, 600, 700, 700)), ("f", (610, 600, 700, 700)))
        expect = oracles.dedup_filter([b.as_list() for b in r.boxes], [b.as_list() for b in rp.boxes], 0.5)
        assert expect == [1]
        assert merge_regions(r, rp, 0.5).boxes == r.boxes + [rp.boxes[1]]

    def test_fifty_random_pairs_match_oracle(self):
        rng = random.Random(2024)
        for _ in range(50):
            r = random_set(rng, "class-agnostic", rng.randrange(0, 21))
            rp = random_set(rng, "class-aware", rng.randrange(0, 21))
            admitted = oracles.dedup_filter([b.as_list() for b in r.boxes], [b.as_list() for b in rp.boxes], 0.5)
            assert merge_regions(r, rp, 0.5).boxes == r.boxes + [rp.boxes[k] for k in admitted]

    @given(st.lists(boxes(), max_size=10), st.lists(boxes(), max_size=10), st.sampled_from([0.3, 0.5, 0.7]))
    def test_prefix_and_size(self, a, b, thr):
        r = RegionSet("class-agnostic", tuple(Region(x) for x in a))
        rp = RegionSet("class-aware", tuple(Region(x, "t") for x in b))
        out = merge_regions(r, rp, thr)
        assert out.regions[: len(r)] == r.regions
        assert len(out) <= len(r) + len(rp)
        assert merge_regions(r, rp, thr) == out

    def test_lenient_box_repair(self):
        r = RegionSet("class-agnostic", (Region(BoundingBox(0, 0, 1200, 50), "wall"),))
        assert r.regions[0].box == BoundingBox(0, 0, 999, 50)

    def test_unknown_source(self):
        with pytest.raises(ValueError):
            RegionSet("class-psychic")

    def test_region_file_formats(self, tmp_path):
        agnostic, aware = region_sets_for(SCENES[0])
        obj = tmp_path / "one.json"
        obj.write_text(json.dumps(agnostic))
        arr = tmp_path / "arr.json"
        arr.write_text(json.dumps([agnostic, aware]))
        lines = tmp_path / "sets.jsonl"
        lines.write_text(json.dumps(agnostic) + "\n" + json.dumps(aware) + "\n")
        assert len(load_region_sets(obj)) == 1
        assert load_region_sets(arr) == load_region_sets(lines)
        (first,) = load_region_sets(obj)
        assert RegionSet.from_dict(first.to_dict()) == first


class TestEntityPrompt:
    def test_contains_entry_verbatim(self):
        prompt = build_entity_prompt(rset("merged", ("brown dog", (100, 200, 500, 600))))
        assert "brown dog <box>[[100, 200, 500, 600]]</box>" in prompt.text
        assert "Attributes" in prompt.text and "Global state" in prompt.text
        assert "Example caption" in prompt.messages[0][1]

    def test_empty_regions_warn(self):
        with pytest.warns(UserWarning):
            prompt = build_entity_prompt(RegionSet("merged"))
        assert "(tag and box): \n" in prompt.text

    def test_untagged(self):
        with pytest.raises(UntaggedRegion):
            build_entity_prompt(RegionSet("class-agnostic", (Region(BoundingBox(0, 0, 5, 5)),)))

    def test_template_with_unfilled_placeholder(self):
        tpl = PromptTemplate("custom", "1", (("user", "${instances} and ${style}"),))
        with pytest.raises(TemplateError):
            build_entity_prompt(rset("merged", ("dog", (0, 0, 5, 5))), tpl)

    def test_no_warning_for_tagged_regions(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            build_entity_prompt(rset("merged", ("dog", (0, 0, 5, 5))))


DOG_SCENE = SemanticContent(
    (EntityInstance(1, "dog", BoundingBox(0, 0, 100, 100)),),
    (SemanticItem("attribute", 1, "is brown"), SemanticItem("global", None, "it is sunny")))
CAR_SCENE = SemanticContent(
    (EntityInstance(1, "car", BoundingBox(500, 500, 900, 900)),),
    (SemanticItem("attribute", 1, "is blue"), SemanticItem("global", None, "it is foggy")))


class TestConsistency:
    def test_self_case_is_full_score(self, cfg, providers):
        keep, score = consistency_filter(pre(DOG_SCENE), pre(DOG_SCENE), cfg, providers)
        assert (keep, score) == (True, 310.0)

    @pytest.mark.parametrize("scene", SCENES[:5], ids=lambda s: s.id)
    def test_self_case_fixture_scenes(self, scene, cfg, providers):
        content = scene.content()
        assert consistency_filter(pre(content), pre(content), cfg, providers) == (True, 310.0)

    def test_disjoint_content_dropped(self, cfg, providers):
        keep, score = consistency_filter(pre(DOG_SCENE), pre(CAR_SCENE), cfg, providers)
        assert not keep
        assert score == 100.0  # only the vacuous relation dimension survives

    def test_threshold_zero_always_keeps(self, providers):
        cfg = EvalConfig(consistency_drop=0.0)
        assert consistency_filter(pre(DOG_SCENE), pre(CAR_SCENE), cfg, providers)[0]

    def test_keep_decision_symmetric_with_oracles(self, cfg, providers):
        rng = random.Random(5)
        for scene in SCENES[:8]:
            a = scene.content()
            b = SCENES[rng.randrange(len(SCENES))].content()
            forward = consistency_filter(pre(a), pre(b), cfg, providers)[0]
            assert forward == consistency_filter(pre(b), pre(a), cfg, providers)[0]


class TestRunEngine:
    def test_entity_captioners_agree(self, cfg, providers):
        agnostic, aware = (RegionSet.from_dict(d) for d in region_sets_for(SCENES[0]))
        rec = run_engine(agnostic, aware, EntityCaptionerChat(), EntityCaptionerChat(), cfg, providers)
        assert rec.kept and rec.nonloc_score == rec.reverse_nonloc_score == 310.0
        assert rec.caption.count("<box>") == len(agnostic) + 1
        assert set(rec.to_dict()) >= {"image", "caption", "nonloc_score", "kept"}

    def test_disagreeing_checker_drops_pair(self, providers):
        agnostic, aware = (RegionSet.from_dict(d) for d in region_sets_for(SCENES[1]))
        checker = ScriptedChat({}, default="There is a whale <box>[[1, 1, 50, 50]]</box>.")
        rec = run_engine(agnostic, aware, EntityCaptionerChat(), checker, EvalConfig(consistency_drop=0.8), providers)
        # no tag agrees; the empty attribute, relation and global dimensions stay vacuously perfect
        assert not rec.kept and rec.nonloc_score == 210.0
        assert rec.reference_caption.startswith("There is a whale")
