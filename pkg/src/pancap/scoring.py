"""Per-dimension precision/recall/F1 and the weighted overall score."""

from __future__ import annotations

from typing import Optional

from .errors import CountInconsistency
from .types import DimensionCounts, DimensionScore, MatchResult

MAX_SCORE = 100.0


def _rate(correct: int, total: int, other_total: int) -> float:
    if total == 0:
        return MAX_SCORE if other_total == 0 else 0.0
    return MAX_SCORE * correct / total


def prf(true_positives: int, pred_total: int, gt_total: int,
        recall_true_positives: Optional[int] = None) -> DimensionScore:
    """Percent precision, recall and F1.

    ``recall_true_positives`` defaults to ``true_positives``; QA-based
    dimensions pass separate numerators because precision and recall are
    judged on different question sets. When both totals are zero the
    dimension is vacuously perfect (100/100/100).
    """
    tp_r = true_positives if recall_true_positives is None else recall_true_positives
    if min(true_positives, tp_r, pred_total, gt_total) < 0:
        raise CountInconsistency("counts must be non-negative")
    if recall_true_positives is None and true_positives > min(pred_total, gt_total):
        raise CountInconsistency(
            f"{true_positives} true positives exceed min({pred_total}, {gt_total})")
    if true_positives > pred_total or tp_r > gt_total:
        raise CountInconsistency("correct count exceeds its total")
    p = _rate(true_positives, pred_total, gt_total)
    r = _rate(tp_r, gt_total, pred_total)
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return DimensionScore(p, r, f1)


def score_counts(c: DimensionCounts) -> DimensionScore:
    return prf(c.pred_correct, c.pred_total, c.ref_total, recall_true_positives=c.ref_correct)


def tag_and_loc_counts(match: MatchResult, gt_total: int, pred_total: int
                       ) -> tuple[DimensionCounts, DimensionCounts]:
    tag_tp = sum(p.tag_consistent for p in match.pairs)
    loc_tp = sum(p.loc_consistent for p in match.pairs)
    return (DimensionCounts(tag_tp, pred_total, tag_tp, gt_total),
            DimensionCounts(loc_tp, pred_total, loc_tp, gt_total))


def tag_and_loc_scores(match: MatchResult, gt_total: int, pred_total: int
                       ) -> tuple[DimensionScore, DimensionScore]:
    tag, loc = tag_and_loc_counts(match, gt_total, pred_total)
    return prf(tag.pred_correct, pred_total, gt_total), prf(loc.pred_correct, pred_total, gt_total)


def overall_score(s_t: float, s_l: float, s_a: float, s_r: float, s_g: float,
                  lambda_g: float = 0.1) -> float:
    """``s_t + s_l + s_a + s_r + lambda_g * s_g`` over F1 percentages."""
    return s_t + s_l + s_a + s_r + lambda_g * s_g


def nonloc_score(s_t: float, s_a: float, s_r: float, s_g: float, lambda_g: float = 0.1) -> float:
    """The overall score with the localization term left out."""
    return s_t + s_a + s_r + lambda_g * s_g
