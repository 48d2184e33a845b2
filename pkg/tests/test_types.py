from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from pancap.errors import DanglingReference, DegenerateBox, DuplicateInstanceId, OutOfRange
from pancap.types import (
    BoundingBox,
    DimensionCounts,
    DimensionScore,
    EntityInstance,
    EvalConfig,
    MatchedPair,
    MatchResult,
    PancapReport,
    SemanticContent,
    SemanticItem,
    validate_box,
)


class TestBoundingBox:
    def test_valid_box_passes_strict(self):
        b = BoundingBox(0, 0, 999, 999)
        assert validate_box(b) is b

    @pytest.mark.parametrize("coords", [(10, 10, 10, 50), (10, 50, 20, 50), (30, 10, 20, 50)])
    def test_degenerate_rejected(self, coords):
        with pytest.raises(DegenerateBox):
            validate_box(BoundingBox(*coords))

    @pytest.mark.parametrize("coords", [(-1, 0, 10, 10), (0, 0, 1000, 10), (0, 0, 10, 1200)])
    def test_out_of_range_rejected(self, coords):
        with pytest.raises(OutOfRange):
            validate_box(BoundingBox(*coords))

    def test_lenient_clamps_and_swaps(self):
        assert validate_box(BoundingBox(-5, 20, 1200, 10), strict=False) == BoundingBox(0, 10, 999, 20)

    def test_lenient_still_rejects_zero_area(self):
        with pytest.raises(DegenerateBox):
            validate_box(BoundingBox(5, 5, 5, 50), strict=False)

    @given(st.lists(st.integers(-2000, 2000), min_size=4, max_size=4))
    def test_lenient_result_is_strictly_valid(self, coords):
        try:
            fixed = validate_box(BoundingBox(*coords), strict=False)
        except DegenerateBox:
            return
        assert validate_box(fixed) == fixed

    def test_from_list_rejects_non_integers(self):
        with pytest.raises(ValueError):
            BoundingBox.from_list([0, 0, 1.5, 3])
        with pytest.raises(ValueError):
            BoundingBox.from_list([0, 0, 1])
        assert BoundingBox.from_list([1, 2, 3.0, 4]) == BoundingBox(1, 2, 3, 4)


class TestSemanticContent:
    def _inst(self, i, tag="dog"):
        return EntityInstance(i, tag, BoundingBox(0, 0, 10 * i, 10 * i))

    def test_duplicate_ids_rejected(self):
        with pytest.raises(DuplicateInstanceId):
            SemanticContent((self._inst(1), self._inst(1, "cat")))

    def test_dangling_subject_rejected(self):
        with pytest.raises(DanglingReference):
            SemanticContent((self._inst(1),), (SemanticItem("attribute", 2, "is red"),))

    def test_dangling_object_rejected(self):
        with pytest.raises(DanglingReference):
            SemanticContent((self._inst(1),), (SemanticItem("relation", 1, "is near ID 3", 3),))

    def test_item_shape_rules(self):
        with pytest.raises(ValueError):
            SemanticItem("global", 1, "x")
        with pytest.raises(ValueError):
            SemanticItem("attribute", None, "x")
        with pytest.raises(ValueError):
            SemanticItem("attribute", 1, "x", object_id=2)
        with pytest.raises(ValueError):
            SemanticItem("colour", 1, "x")

    def test_statement(self):
        assert SemanticItem("attribute", 3, "is red").statement == "ID 3 is red"
        assert SemanticItem("global", None, "the sky is blue").statement == "the sky is blue"

    def test_dict_round_trip(self):
        c = SemanticContent((self._inst(1), self._inst(2, "mat")),
                            (SemanticItem("attribute", 1, "is red"),
                             SemanticItem("relation", 1, "is on ID 2", 2),
                             SemanticItem("global", None, "it is dark")))
        assert SemanticContent.from_dict(c.to_dict()) == c
        assert [i.text for i in c.items_of("relation")] == ["is on ID 2"]


class TestReportAndConfig:
    def test_report_round_trip(self):
        s = DimensionScore(50.0, 100.0, 66.67)
        r = PancapReport(s, s, s, s, s, 123.4, {"tag": DimensionCounts(1, 2, 1, 1)})
        back = PancapReport.from_dict(r.to_dict())
        assert back == r and back.counts == r.counts

    def test_config_defaults(self):
        c = EvalConfig()
        assert (c.mu, c.delta_t, c.delta_l, c.lambda_g) == (10.0, 0.5, 0.5, 0.1)

    @pytest.mark.parametrize("kw", [{"delta_t": 1.5}, {"mu": 0}, {"lambda_g": -1}, {"merge_iou": -0.1}])
    def test_config_rejects_bad_values(self, kw):
        with pytest.raises(ValueError):
            EvalConfig(**kw)

    def test_config_rejects_unknown_keys(self):
        with pytest.raises(ValueError):
            EvalConfig.from_dict({"mu": 10, "gamma": 1})

    def test_loc_consistent_requires_tag_consistent(self):
        with pytest.raises(ValueError):
            MatchedPair(0, 0, 1, 1, 0.0, 0.9, tag_consistent=False, loc_consistent=True)

    def test_match_must_be_one_to_one(self):
        p = MatchedPair(0, 0, 1, 1, 100.0, 1.0, True, True)
        q = MatchedPair(0, 1, 1, 2, 100.0, 1.0, True, True)
        with pytest.raises(ValueError):
            MatchResult((p, q))
        assert MatchResult((p,)).id_map("ref->pred") == {1: 1}
