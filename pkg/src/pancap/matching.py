"""Tag similarity, box IoU and optimal one-to-one instance matching.

Pair scores are kept as exact rationals (``fractions.Fraction``) so that the
assignment objective, tie detection and tie-breaking are exact; floats only
appear in the returned :class:`MatchResult`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .types import BoundingBox, EntityInstance, EvalConfig, MatchedPair, MatchResult, box_area

if TYPE_CHECKING:
    from .llm.providers import Embedder


def iou_exact(a: BoundingBox, b: BoundingBox) -> Fraction:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = iw * ih if iw > 0 and ih > 0 else 0
    union = box_area(a) + box_area(b) - inter
    if union <= 0:
        return Fraction(0)
    return Fraction(inter, union)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    return float(iou_exact(a, b))


# -- synonyms ----------------------------------------------------------------


class SynonymLexicon:
    """Lowercase lemma -> synonym set, closed under symmetry on load."""

    def __init__(self, mapping: dict[str, Iterable[str]] | None = None):
        self._syn: dict[str, set[str]] = {}
        for lemma, syns in (mapping or {}).items():
            a = lemma.strip().lower()
            for s in syns:
                b = s.strip().lower()
                if a and b and a != b:
                    self._syn.setdefault(a, set()).add(b)
                    self._syn.setdefault(b, set()).add(a)

    @classmethod
    def load(cls, path: str | Path) -> "SynonymLexicon":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("synonym lexicon must be a JSON object")
        return cls(data)

    def synonyms(self, word: str) -> frozenset[str]:
        return frozenset(self._syn.get(word.strip().lower(), ()))

    def share_synset(self, a: str, b: str) -> bool:
        a, b = a.strip().lower(), b.strip().lower()
        return a == b or b in self._syn.get(a, ())

    def to_dict(self) -> dict[str, list[str]]:
        return {k: sorted(v) for k, v in sorted(self._syn.items())}

    def __len__(self) -> int:
        return len(self._syn)


def normalize_tag(tag: str) -> str:
    return " ".join(tag.lower().split())


def head_noun(tag: str) -> str:
    words = normalize_tag(tag).split()
    return words[-1] if words else ""


@dataclass(frozen=True)
class SimilarityComponents:
    s_eq: int
    s_sy: int
    cos: float
    total: float
    exact: Fraction

    @property
    def components(self) -> tuple[int, int, float]:
        return self.s_eq, self.s_sy, self.cos


def clamped_cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    c = float(np.dot(u, v)) / (nu * nv)
    return min(max(c, 0.0), 1.0)


def tag_similarity(t1: str, t2: str, lexicon: SynonymLexicon, embedder: "Embedder",
                   mu: float = 10.0) -> SimilarityComponents:
    """Weighted tag similarity: mu^2 * exact + mu * synonym + cosine."""
    if not t1.strip() or not t2.strip():
        raise ValueError("tags must be non-empty")
    s_eq = int(normalize_tag(t1) == normalize_tag(t2))
    s_sy = int(lexicon.share_synset(head_noun(t1), head_noun(t2)))
    cos = clamped_cosine(embedder.embed(t1), embedder.embed(t2))
    m = Fraction(mu)
    exact = m * m * s_eq + m * s_sy + Fraction(cos)
    return SimilarityComponents(s_eq, s_sy, cos, float(exact), exact)


# -- assignment --------------------------------------------------------------


def _hungarian_min(cost: list[list[Fraction]]) -> tuple[list[int], list[Fraction], list[Fraction]]:
    """Square min-cost assignment via shortest augmenting paths.

    Returns ``(col_of_row, u, v)`` where ``u``/``v`` are optimal dual
    potentials satisfying ``u[i] + v[j] <= cost[i][j]`` with equality on
    every edge of every optimal assignment.
    """
    n = len(cost)
    inf = math.inf
    u = [Fraction(0)] * (n + 1)
    v = [Fraction(0)] * (n + 1)
    p = [0] * (n + 1)  # p[j]: row matched to column j (1-based), 0 = free
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv: list = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta: Fraction | float = inf
            j1 = 0
            row = cost[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j], way[j] = cur, j0
                if minv[j] < delta:
                    delta, j1 = minv[j], j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = [0] * n
    for j in range(1, n + 1):
        if p[j]:
            col_of_row[p[j] - 1] = j - 1
    return col_of_row, u[1:], v[1:]


def _has_perfect_matching(adj: list[list[int]], rows: list[int], free_cols: set[int]) -> bool:
    match_col: dict[int, int] = {}

    def augment(r: int, seen: set[int]) -> bool:
        for c in adj[r]:
            if c in free_cols and c not in seen:
                seen.add(c)
                if c not in match_col or augment(match_col[c], seen):
                    match_col[c] = r
                    return True
        return False

    return all(augment(r, set()) for r in rows)


def solve_assignment(score: Sequence[Sequence[Fraction]]) -> list[int]:
    """Maximum-score perfect assignment on a square matrix.

    Among all optimal assignments the lexicographically smallest
    row-to-column vector is returned, so equal-score ties resolve the same way
    on every run.
    """
    n = len(score)
    if n == 0:
        return []
    cost = [[-Fraction(x) for x in row] for row in score]
    _, u, v = _hungarian_min(cost)
    # Every optimal assignment is a perfect matching of the tight-edge subgraph.
    adj = [[j for j in range(n) if u[i] + v[j] == cost[i][j]] for i in range(n)]
    chosen: list[int] = []
    free = set(range(n))
    for i in range(n):
        for j in adj[i]:
            if j not in free:
                continue
            free.discard(j)
            if _has_perfect_matching(adj, list(range(i + 1, n)), free):
                chosen.append(j)
                break
            free.add(j)
        else:  # pragma: no cover - the Hungarian solution guarantees a choice
            raise RuntimeError("tight subgraph lost its perfect matching")
    return chosen


def pair_score_matrix(gt: Sequence[EntityInstance], pred: Sequence[EntityInstance],
                      cfg: EvalConfig, lexicon: SynonymLexicon, embedder: "Embedder"
                      ) -> tuple[list[list[SimilarityComponents]], list[list[Fraction]]]:
    sims = [[tag_similarity(g.tag, p.tag, lexicon, embedder, cfg.mu) for p in pred] for g in gt]
    ious = [[iou_exact(g.box, p.box) for p in pred] for g in gt]
    return sims, ious


def match_instances(gt: Sequence[EntityInstance], pred: Sequence[EntityInstance],
                    cfg: EvalConfig, lexicon: SynonymLexicon, embedder: "Embedder") -> MatchResult:
    """Optimal one-to-one matching maximising the sum of tag similarity plus IoU.

    The smaller side is padded with zero-score dummies, so exactly
    ``min(len(gt), len(pred))`` real pairs are produced.
    """
    n, m = len(gt), len(pred)
    if n == 0 or m == 0:
        return MatchResult((), tuple(range(n)), tuple(range(m)), 0.0)
    sims, ious = pair_score_matrix(gt, pred, cfg, lexicon, embedder)
    k = max(n, m)
    score = [[sims[i][j].exact + ious[i][j] if i < n and j < m else Fraction(0)
              for j in range(k)] for i in range(k)]
    cols = solve_assignment(score)
    delta_t, delta_l = Fraction(cfg.delta_t), Fraction(cfg.delta_l)
    pairs = []
    objective = Fraction(0)
    for i, j in enumerate(cols):
        if i >= n or j >= m:
            continue
        objective += score[i][j]
        tag_ok = sims[i][j].exact >= delta_t
        loc_ok = tag_ok and ious[i][j] >= delta_l
        pairs.append(MatchedPair(i, j, gt[i].id, pred[j].id, sims[i][j].total,
                                 float(ious[i][j]), tag_ok, loc_ok))
    matched_gt = {p.gt_index for p in pairs}
    matched_pred = {p.pred_index for p in pairs}
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_gt=tuple(i for i in range(n) if i not in matched_gt),
        unmatched_pred=tuple(j for j in range(m) if j not in matched_pred),
        objective=float(objective),
    )


def dedup_append(kept: Sequence[BoundingBox], candidates: Iterable[BoundingBox],
                 threshold: float) -> list[int]:
    """Indices of ``candidates`` whose IoU with every kept or admitted box is below ``threshold``.

    Admitted candidates join the comparison set, so candidates also dedup
    against each other in input order.
    """
    thr = Fraction(threshold)
    pool = list(kept)
    admitted = []
    for idx, box in enumerate(candidates):
        if all(iou_exact(box, other) < thr for other in pool):
            admitted.append(idx)
            pool.append(box)
    return admitted

