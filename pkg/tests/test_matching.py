from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from helpers import VOCAB, VOCAB_LEX, boxes, exact_pair_score, random_instances
from pancap.llm.mocks import HashedBagOfWordsEmbedder
from pancap.llm.providers import Embedder
from pancap.matching import (
    SynonymLexicon,
    dedup_append,
    head_noun,
    iou,
    iou_exact,
    match_instances,
    solve_assignment,
    tag_similarity,
)
from pancap.types import BoundingBox, EntityInstance, EvalConfig


class TableEmbedder(Embedder):
    """Embeds from a fixed lookup table."""

    def __init__(self, table):
        super().__init__()
        self.table = table

    def _embed(self, text):
        return self.table[text]


EMB = HashedBagOfWordsEmbedder()


class TestIoU:
    def test_examples(self):
        a = BoundingBox(0, 0, 10, 10)
        assert iou(a, a) == 1.0
        assert iou(a, BoundingBox(20, 20, 30, 30)) == 0.0
        assert iou_exact(a, BoundingBox(5, 5, 15, 15)) == Fraction(25, 175)
        assert iou(a, BoundingBox(5, 5, 15, 15)) == pytest.approx(0.142857, abs=1e-6)

    def test_touching_edges_do_not_overlap(self):
        assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(10, 0, 20, 10)) == 0.0

    @given(boxes(), boxes())
    def test_matches_oracle(self, a, b):
        assert iou_exact(a, b) == oracles.box_iou(a.as_list(), b.as_list())

    @given(boxes(), boxes())
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a) and 0.0 <= v <= 1.0
        assert iou(a, a) == 1.0


class TestLexicon:
    def test_symmetric_closure(self):
        lex = SynonymLexicon({"dog": ["puppy", "hound"]})
        assert "dog" in lex.synonyms("puppy")
        assert lex.share_synset("Hound", "dog")
        assert not lex.share_synset("puppy", "hound")

    def test_load(self, tmp_path):
        p = tmp_path / "lex.json"
        p.write_text('{"car": ["automobile"]}')
        assert SynonymLexicon.load(p).share_synset("automobile", "car")


class TestTagSimilarity:
    def test_exact(self):
        s = tag_similarity("dog", "Dog ", SynonymLexicon(), EMB)
        assert (s.s_eq, s.s_sy, s.cos, s.total) == (1, 1, 1.0, 111.0)

    def test_unrelated(self):
        assert tag_similarity("dog", "car", SynonymLexicon(), EMB).total == 0.0

    def test_synonym_with_cosine(self):
        emb = TableEmbedder({"dog": [1.0, 0.0], "puppy": [0.8, 0.6]})
        s = tag_similarity("puppy", "dog", SynonymLexicon({"dog": ["puppy"]}), emb)
        assert (s.s_eq, s.s_sy) == (0, 1)
        assert s.total == pytest.approx(10.8, abs=1e-12)

    def test_negative_cosine_clamped(self):
        emb = TableEmbedder({"up": [1.0, 0.0], "down": [-1.0, 0.0]})
        assert tag_similarity("up", "down", SynonymLexicon(), emb).cos == 0.0

    def test_head_noun_synonym_rule(self):
        assert head_noun("small brown Dog") == "dog"
        s = tag_similarity("small dog", "big puppy", SynonymLexicon({"dog": ["puppy"]}), EMB)
        assert s.s_sy == 1

    def test_empty_tag(self):
        with pytest.raises(ValueError):
            tag_similarity("", "dog", SynonymLexicon(), EMB)

    @given(st.sampled_from(["dog", "red car", "tree"]), st.floats(0.01, 100))
    def test_equal_tags_always_consistent(self, tag, mu):
        s = tag_similarity(tag, tag, SynonymLexicon(), EMB, mu)
        assert s.total >= mu * mu and s.total <= mu * mu + mu + 1 + 1e-9


def inst(i, tag, box):
    return EntityInstance(i, tag, BoundingBox(*box))


class TestMatchInstances:
    cfg = EvalConfig()

    def test_empty(self):
        r = match_instances([], [], self.cfg, SynonymLexicon(), EMB)
        assert r.pairs == () and r.objective == 0.0

    def test_identity(self):
        a = [inst(1, "dog", (0, 0, 100, 100))]
        r = match_instances(a, a, self.cfg, SynonymLexicon(), EMB)
        (p,) = r.pairs
        assert p.tag_consistent and p.loc_consistent and p.iou == 1.0

    def test_swapped_duplicates_resolved_by_iou(self):
        gt = [inst(1, "dog", (0, 0, 100, 100)), inst(2, "dog", (500, 500, 600, 600))]
        pred = [inst(1, "dog", (500, 500, 600, 600)), inst(2, "dog", (0, 0, 100, 100))]
        r = match_instances(gt, pred, self.cfg, SynonymLexicon(), EMB)
        assert sorted((p.gt_index, p.pred_index) for p in r.pairs) == [(0, 1), (1, 0)]
        assert all(p.iou == 1.0 for p in r.pairs)

    def test_tags_consistent_but_far(self):
        gt = [inst(1, "dog", (0, 0, 100, 100))]
        pred = [inst(1, "dog", (500, 500, 600, 600))]
        (p,) = match_instances(gt, pred, self.cfg, SynonymLexicon(), EMB).pairs
        assert p.tag_consistent and not p.loc_consistent

    def test_unequal_sizes(self):
        gt = [inst(1, "dog", (0, 0, 100, 100))]
        pred = [inst(1, "cat", (0, 0, 100, 100)), inst(2, "dog", (0, 0, 90, 100))]
        r = match_instances(gt, pred, self.cfg, SynonymLexicon(), EMB)
        assert [(p.gt_index, p.pred_index) for p in r.pairs] == [(0, 1)]
        assert r.unmatched_pred == (0,) and r.unmatched_gt == ()

    def test_tie_break_lowest_index(self):
        gt = [inst(1, "dog", (0, 0, 10, 10)), inst(2, "dog", (0, 0, 10, 10))]
        pred = [inst(1, "dog", (0, 0, 10, 10)), inst(2, "dog", (0, 0, 10, 10))]
        r = match_instances(gt, pred, self.cfg, SynonymLexicon(), EMB)
        assert [(p.gt_index, p.pred_index) for p in r.pairs] == [(0, 0), (1, 1)]


def test_vocabulary_cosines_are_binary():
    for a in VOCAB:
        for b in VOCAB:
            cos = float(np.dot(EMB.embed(a), EMB.embed(b)))
            assert cos == (1.0 if a == b else 0.0)


def test_optimality_against_enumeration():
    rng = random.Random(7)
    cfg = EvalConfig()
    for _ in range(300):
        gt, pred = random_instances(rng, rng.randrange(0, 6)), random_instances(rng, rng.randrange(0, 6))
        r = match_instances(gt, pred, cfg, VOCAB_LEX, EMB)
        best = oracles.best_assignment_value([[exact_pair_score(g, p) for p in pred] for g in gt])
        chosen = sum((exact_pair_score(gt[q.gt_index], pred[q.pred_index]) for q in r.pairs), Fraction(0))
        assert chosen == best
        assert len(r.pairs) == min(len(gt), len(pred))


def test_solver_tie_break_is_lexicographic():
    rng = random.Random(3)
    for _ in range(300):
        n = rng.randrange(1, 6)
        m = [[Fraction(rng.randrange(0, 3)) for _ in range(n)] for _ in range(n)]
        assert tuple(solve_assignment(m)) == oracles.lexicographic_best(m)


@settings(max_examples=60)
@given(st.randoms(use_true_random=False))
def test_permutation_invariance(rnd):
    # Distinct boxes keep the optimum unique, so reordering cannot change which instances pair up.
    gt = random_instances(rnd, rnd.randrange(1, 6))
    pred = random_instances(rnd, rnd.randrange(1, 6))
    cfg = EvalConfig()
    base = match_instances(gt, pred, cfg, VOCAB_LEX, EMB)
    pg, pp = gt[:], pred[:]
    rnd.shuffle(pg)
    rnd.shuffle(pp)
    again = match_instances(pg, pp, cfg, VOCAB_LEX, EMB)
    assert again.objective == pytest.approx(base.objective, abs=1e-9)
    ident = lambda r, g, p: {(g[q.gt_index].id, p[q.pred_index].id) for q in r.pairs}  # noqa: E731
    if len({(i.tag, i.box) for i in gt}) == len(gt) and len({(i.tag, i.box) for i in pred}) == len(pred):
        scores = sorted(exact_pair_score(g, p) for g in gt for p in pred)
        if len(set(scores)) == len(scores):
            assert ident(again, pg, pp) == ident(base, gt, pred)


@settings(max_examples=200)
@given(st.randoms(use_true_random=False))
def test_loc_never_without_tag(rnd):
    gt = random_instances(rnd, rnd.randrange(0, 6))
    pred = random_instances(rnd, rnd.randrange(0, 6))
    for p in match_instances(gt, pred, EvalConfig(), VOCAB_LEX, EMB).pairs:
        assert p.tag_consistent or not p.loc_consistent


class TestDedupAppend:
    def test_identical_excluded_disjoint_included(self):
        kept = [BoundingBox(0, 0, 100, 100)]
        cands = [BoundingBox(0, 0, 100, 100), BoundingBox(500, 500, 600, 600)]
        assert dedup_append(kept, cands, 0.5) == [1]

    def test_self_dedup(self):
        cands = [BoundingBox(0, 0, 100, 100), BoundingBox(0, 0, 100, 100)]
        assert dedup_append([], cands, 0.5) == [0]

    @given(st.lists(boxes(), max_size=8), st.lists(boxes(), max_size=8), st.sampled_from([0.1, 0.5, 0.9]))
    def test_matches_oracle(self, kept, cands, thr):
        assert dedup_append(kept, cands, thr) == oracles.dedup_filter(
            [b.as_list() for b in kept], [b.as_list() for b in cands], thr)
