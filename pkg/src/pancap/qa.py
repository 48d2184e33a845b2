"""Instance-aware question answering for attribute, relation and global items.

Items from one caption are rewritten into the other caption's instance-id
space through the match, turned into a Yes-question and a No-question each,
and judged against the other caption. An item is correct only when the judge
answers Yes to the first and No to the second.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, TypeVar

from .captions import rewrite_id_refs, serialize_semantic_lines
from .errors import AuthFailure, GenerationFailed, JudgeFailed, ProviderError
from .llm.prompts import get_template
from .llm.providers import ChatProvider
from .scoring import score_counts
from .types import DIMENSIONS, DimensionCounts, DimensionScore, MatchResult, SemanticContent, SemanticItem

log = logging.getLogger(__name__)

CONTENT_MARKER = "Extracted content:\n"
YES, NO, ABSTAIN = "Yes", "No", "Abstain"

_COPULA = re.compile(r"^(ID \d+) (is|are) (.+)$")
_FIRST_WORD = re.compile(r"^[\s\"'*_`(\[]*([A-Za-z]+)")

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class QuestionPair:
    item_ref: int
    dimension: str
    yes_q: str
    no_q: Optional[str]  # None when generation failed; the item then counts as incorrect
    statement: str = ""


@dataclass(frozen=True)
class Verdict:
    item_ref: int
    dimension: str
    yes_answer: str
    no_answer: str

    @property
    def correct(self) -> bool:
        return self.yes_answer == YES and self.no_answer == NO


def yes_question(statement: str) -> str:
    s = " ".join(statement.split()).rstrip(".")
    m = _COPULA.match(s)
    if m:
        return f"{m.group(2).capitalize()} {m.group(1)} {m.group(3)}?"
    return f"Is it true that {s}?"


def remap_instance_ids(items: Iterable[SemanticItem], match: MatchResult, direction: str
                       ) -> tuple[list[SemanticItem], list[SemanticItem]]:
    """Rewrite instance ids through the match; unmappable items go to the second list."""
    mapping = match.id_map(direction)
    mapped, dropped = [], []
    for item in items:
        if item.subject_id is None:
            mapped.append(item)
            continue
        if item.subject_id not in mapping or (item.object_id is not None and item.object_id not in mapping):
            dropped.append(item)
            continue
        text, ok = rewrite_id_refs(item.text, mapping)
        if not ok:
            dropped.append(item)
            continue
        obj = None if item.object_id is None else mapping[item.object_id]
        mapped.append(SemanticItem(item.dimension, mapping[item.subject_id], text, obj))
    return mapped, dropped


def _fan_out(fn: Callable[[T], R], args: Sequence[T], workers: int) -> list[R]:
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ThreadPoolExecutor(max_workers=min(workers, len(args))) as pool:
        return list(pool.map(fn, args))


def _parse_generated_question(reply: str, yes_q: str) -> str:
    lines = [ln.strip().strip("\"'").strip() for ln in reply.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].endswith("?"):
        raise GenerationFailed(f"generator reply is not a question: {reply[:80]!r}")
    q = lines[0]
    if q == yes_q:
        raise GenerationFailed("generator repeated the affirmative question")
    return q


def generate_question_pairs(items: Sequence[SemanticItem], generator: ChatProvider) -> list[QuestionPair]:
    template = get_template("question_generation")

    def one(indexed: tuple[int, SemanticItem]) -> QuestionPair:
        idx, item = indexed
        yq = yes_question(item.statement)
        try:
            reply = generator.chat(template.render(statement=item.statement, yes_question=yq))
            nq: Optional[str] = _parse_generated_question(reply, yq)
        except (GenerationFailed, ProviderError) as exc:
            log.warning("no-question generation failed for %r: %s", item.statement, exc)
            nq = None
        return QuestionPair(idx, item.dimension, yq, nq, item.statement)

    return _fan_out(one, list(enumerate(items)), generator.profile.max_in_flight)


def parse_answer(reply: str) -> str:
    m = _FIRST_WORD.match(reply or "")
    if not m:
        return ABSTAIN
    word = m.group(1).lower()
    return YES if word == "yes" else NO if word == "no" else ABSTAIN


def render_judge_context(content: SemanticContent, prose: Optional[str] = None) -> str:
    parts = []
    if prose and prose.strip():
        parts.append(" ".join(prose.split()))
    parts.append(CONTENT_MARKER + serialize_semantic_lines(content))
    return "\n\n".join(parts)


def judge_questions(pairs: Sequence[QuestionPair], judging_caption: str, judge: ChatProvider,
                    caption_id: Optional[str] = None) -> list[Verdict]:
    """One judge call per question; failed calls become Abstain."""
    template = get_template("judge")

    def ask(question: Optional[str]) -> str:
        if question is None:
            return ABSTAIN
        try:
            return parse_answer(judge.chat(template.render(caption=judging_caption, question=question)))
        except AuthFailure as exc:
            raise JudgeFailed(f"judge rejected credentials: {exc}", caption_id) from exc
        except ProviderError as exc:
            log.warning("judge call failed for %r: %s", question, exc)
            return ABSTAIN

    questions = [q for p in pairs for q in (p.yes_q, p.no_q)]
    answers = _fan_out(ask, questions, judge.profile.max_in_flight)
    return [Verdict(p.item_ref, p.dimension, answers[2 * k], answers[2 * k + 1])
            for k, p in enumerate(pairs)]


def verdict_record(pair: QuestionPair, verdict: Verdict) -> dict:
    return {"item": pair.statement, "dimension": pair.dimension, "yes_q": pair.yes_q,
            "no_q": pair.no_q, "yes_answer": verdict.yes_answer,
            "no_answer": verdict.no_answer, "correct": verdict.correct}


def _per_dim(objs: Iterable, attr: str = "dimension") -> dict[str, int]:
    out = dict.fromkeys(DIMENSIONS, 0)
    for o in objs:
        out[getattr(o, attr)] += 1
    return out


def qa_counts(pred_verdicts: Sequence[Verdict], ref_verdicts: Sequence[Verdict],
              pred_dropped: Sequence[SemanticItem] = (), ref_dropped: Sequence[SemanticItem] = ()
              ) -> dict[str, DimensionCounts]:
    pc = _per_dim(v for v in pred_verdicts if v.correct)
    pt = _per_dim(pred_verdicts)
    rc = _per_dim(v for v in ref_verdicts if v.correct)
    rt = _per_dim(ref_verdicts)
    pd = _per_dim(pred_dropped)
    rd = _per_dim(ref_dropped)
    return {d: DimensionCounts(pc[d], pt[d] + pd[d], rc[d], rt[d] + rd[d]) for d in DIMENSIONS}


def qa_scores(pred_verdicts: Sequence[Verdict], ref_verdicts: Sequence[Verdict],
              pred_dropped: Sequence[SemanticItem] = (), ref_dropped: Sequence[SemanticItem] = ()
              ) -> tuple[DimensionScore, DimensionScore, DimensionScore]:
    """Attribute, relation and global scores; dropped items count as incorrect."""
    counts = qa_counts(pred_verdicts, ref_verdicts, pred_dropped, ref_dropped)
    a, r, g = (score_counts(counts[d]) for d in DIMENSIONS)
    return a, r, g


@dataclass(frozen=True)
class QADirection:
    pairs: tuple[QuestionPair, ...]
    verdicts: tuple[Verdict, ...]
    dropped: tuple[SemanticItem, ...]


def run_direction(items: Sequence[SemanticItem], match: MatchResult, direction: str,
                  judging_context: str, generator: ChatProvider, judge: ChatProvider,
                  caption_id: Optional[str] = None) -> QADirection:
    mapped, dropped = remap_instance_ids(items, match, direction)
    pairs = generate_question_pairs(mapped, generator)
    verdicts = judge_questions(pairs, judging_context, judge, caption_id)
    return QADirection(tuple(pairs), tuple(verdicts), tuple(dropped))
