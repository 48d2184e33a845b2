from __future__ import annotations

import json

import pytest
from hypothesis import assume, given, strategies as st

import oracles
from pancap.errors import AllTied, DegenerateVariance
from pancap.fixtures import RATINGS
from pancap.stats import RatedSample, agreement_row, kendall_tau, load_ratings, pcc, r_squared


def samples(xs, ys):
    return [RatedSample(float(x), float(y)) for x, y in zip(xs, ys)]


HAND = samples(*zip(*RATINGS))
XS, YS = zip(*RATINGS)


class TestTrivialCases:
    def test_identity(self):
        s = samples(range(5), range(5))
        assert pcc(s) == 1.0 and r_squared(s) == 1.0 and kendall_tau(s) == 1.0
        assert agreement_row(s) == "1.000 0.000 1.000"

    def test_negated(self):
        s = samples(range(5), [-v for v in range(5)])
        assert pcc(s) == -1.0 and kendall_tau(s) == -1.0

    def test_reversed_ranks(self):
        s = samples([1, 2, 3, 4, 5, 6], [60, 50, 40, 30, 20, 10])
        assert kendall_tau(s) == -1.0


class TestOracles:
    def test_pcc(self):
        assert abs(pcc(HAND) - oracles.pearson(XS, YS)) <= 1e-9

    def test_unexplained_variance(self):
        assert abs((1 - r_squared(HAND)) - (1 - oracles.least_squares_r2(XS, YS))) <= 1e-9

    def test_kendall_with_ties(self):
        # the hand-built ratings contain ties (two 2.0s, two 3.0s, two 3.5s)
        assert len(set(YS)) < len(YS)
        assert abs(kendall_tau(HAND) - oracles.kendall_tau_b(XS, YS)) <= 1e-9

    def test_row_format(self):
        row = agreement_row(HAND)
        parts = row.split()
        assert len(parts) == 3 and all(len(p.split(".")[1]) == 3 for p in parts)

    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=2, max_size=15))
    def test_kendall_matches_pair_enumeration(self, pairs):
        xs, ys = zip(*pairs)
        assume(len(set(xs)) > 1 and len(set(ys)) > 1)
        assert kendall_tau(samples(xs, ys)) == pytest.approx(oracles.kendall_tau_b(xs, ys), abs=1e-12)


finite = st.floats(-1e3, 1e3, allow_nan=False)


class TestInvariance:
    @given(st.floats(0.1, 50), st.floats(-100, 100), st.floats(0.1, 50), st.floats(-100, 100))
    def test_pcc_positive_affine(self, a, b, c, d):
        moved = samples([a * x + b for x in XS], [c * y + d for y in YS])
        assert pcc(moved) == pytest.approx(pcc(HAND), abs=1e-9)

    @given(st.sampled_from([lambda v: v ** 3, lambda v: 2.0 ** (v / 50), lambda v: v + 1000]))
    def test_tau_strictly_monotone(self, f):
        assert kendall_tau(samples([f(x) for x in XS], YS)) == pytest.approx(kendall_tau(HAND), abs=1e-12)

    @given(st.lists(st.tuples(finite, finite), min_size=3, max_size=20))
    def test_bounds(self, pairs):
        xs, ys = zip(*pairs)
        assume(len(set(xs)) > 1 and len(set(ys)) > 1)
        s = samples(xs, ys)
        assert -1.0 - 1e-12 <= pcc(s) <= 1.0 + 1e-12
        assert -1.0 <= kendall_tau(s) <= 1.0


class TestErrors:
    def test_constant_machine_scores(self):
        with pytest.raises(DegenerateVariance):
            r_squared(samples([3, 3, 3], [1, 2, 3]))
        with pytest.raises(DegenerateVariance):
            pcc(samples([3, 3, 3], [1, 2, 3]))

    def test_too_few(self):
        with pytest.raises(DegenerateVariance):
            pcc(samples([1], [2]))
        with pytest.raises(AllTied):
            kendall_tau(samples([1], [2]))

    def test_all_tied(self):
        with pytest.raises(AllTied):
            kendall_tau(samples([1, 2, 3], [5, 5, 5]))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            RatedSample(float("nan"), 1.0)


def test_load_ratings_both_formats(tmp_path):
    rows = [{"machine_score": m, "human_rating": h} for m, h in RATINGS]
    a, b = tmp_path / "r.jsonl", tmp_path / "r.json"
    a.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    b.write_text(json.dumps(rows))
    assert load_ratings(a) == load_ratings(b) == HAND
