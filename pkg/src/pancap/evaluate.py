"""End-to-end PancapScore evaluation of one prediction against one reference."""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from typing import Optional, Union

from .captions import PanopticCaption, parse_caption
from .llm.extraction import extract_semantic_content
from .llm.mocks import HashedBagOfWordsEmbedder, NegationChat, OracleExtractorChat, OracleJudgeChat
from .llm.providers import ChatProvider, Embedder
from .matching import SynonymLexicon, match_instances
from .qa import QADirection, qa_counts, render_judge_context, run_direction
from .scoring import overall_score, score_counts, tag_and_loc_counts
from .types import EvalConfig, MatchResult, PancapReport, SemanticContent


@dataclass
class Providers:
    extractor: ChatProvider
    embedder: Embedder
    generator: ChatProvider
    judge: ChatProvider
    lexicon: SynonymLexicon = field(default_factory=SynonymLexicon)

    @classmethod
    def mock(cls, registry: Optional[dict[str, SemanticContent]] = None,
             lexicon: Optional[SynonymLexicon] = None) -> "Providers":
        """The fully offline oracle provider set."""
        return cls(OracleExtractorChat(registry), HashedBagOfWordsEmbedder(), NegationChat(),
                   OracleJudgeChat(), lexicon or SynonymLexicon())


@dataclass(frozen=True)
class PreExtracted:
    """Semantic content supplied by the caller; ``caption`` only feeds the judge context."""

    content: SemanticContent
    caption: Optional[str] = None


CaptionInput = Union[str, PanopticCaption, SemanticContent, PreExtracted]


class ExtractionCache:
    """Content-hash keyed extraction results, shared across a batch run."""

    def __init__(self) -> None:
        self._store: dict[str, SemanticContent] = {}
        self._lock = threading.Lock()

    def get_or_extract(self, text: str, provider: ChatProvider,
                       caption_id: Optional[str] = None) -> SemanticContent:
        key = hashlib.sha256(text.encode("utf-8")).hexdigest()
        with self._lock:
            hit = self._store.get(key)
        if hit is not None:
            return hit
        content = extract_semantic_content(text, provider, caption_id)
        with self._lock:
            return self._store.setdefault(key, content)

    def __len__(self) -> int:
        return len(self._store)


@dataclass(frozen=True)
class Evaluation:
    report: PancapReport
    match: MatchResult
    pred_content: SemanticContent
    ref_content: SemanticContent
    precision_qa: QADirection
    recall_qa: QADirection


def _resolve(x: CaptionInput, providers: Providers, cache: Optional[ExtractionCache],
             caption_id: Optional[str]) -> tuple[SemanticContent, Optional[str]]:
    if isinstance(x, SemanticContent):
        return x, None
    if isinstance(x, PreExtracted):
        prose = parse_caption(x.caption).prose if x.caption else None
        return x.content, prose
    text = x.raw_text if isinstance(x, PanopticCaption) else x
    if cache is not None:
        content = cache.get_or_extract(text, providers.extractor, caption_id)
    else:
        content = extract_semantic_content(text, providers.extractor, caption_id)
    return content, parse_caption(text).prose


def evaluate_pair_detailed(pred: CaptionInput, ref: CaptionInput, cfg: EvalConfig,
                           providers: Providers, caption_id: Optional[str] = None,
                           cache: Optional[ExtractionCache] = None) -> Evaluation:
    pred_id = None if caption_id is None else f"{caption_id}/prediction"
    ref_id = None if caption_id is None else f"{caption_id}/reference"
    pred_content, pred_prose = _resolve(pred, providers, None, pred_id)
    ref_content, ref_prose = _resolve(ref, providers, cache, ref_id)

    match = match_instances(list(ref_content.instances), list(pred_content.instances), cfg,
                            providers.lexicon, providers.embedder)
    tag_c, loc_c = tag_and_loc_counts(match, len(ref_content.instances), len(pred_content.instances))

    ref_context = render_judge_context(ref_content, ref_prose)
    pred_context = render_judge_context(pred_content, pred_prose)
    precision_qa = run_direction(pred_content.items, match, "pred->ref", ref_context,
                                 providers.generator, providers.judge, ref_id)
    recall_qa = run_direction(ref_content.items, match, "ref->pred", pred_context,
                              providers.generator, providers.judge, pred_id)
    qa = qa_counts(precision_qa.verdicts, recall_qa.verdicts, precision_qa.dropped, recall_qa.dropped)

    counts = {"tag": tag_c, "loc": loc_c, "att": qa["attribute"], "rel": qa["relation"],
              "glo": qa["global"]}
    scores = {k: score_counts(v) for k, v in counts.items()}
    overall = overall_score(scores["tag"].f1, scores["loc"].f1, scores["att"].f1, scores["rel"].f1,
                            scores["glo"].f1, cfg.lambda_g)
    report = PancapReport(overall=overall, counts=counts, **scores)
    return Evaluation(report, match, pred_content, ref_content, precision_qa, recall_qa)


def evaluate_pair(pred: CaptionInput, ref: CaptionInput, cfg: EvalConfig, providers: Providers,
                  caption_id: Optional[str] = None,
                  cache: Optional[ExtractionCache] = None) -> PancapReport:
    """PancapScore report for ``pred`` judged against ``ref``.

    Captions given as text are extracted first; reference extractions go
    through ``cache`` when one is supplied. Failures raise
    ``ExtractionFailed`` or ``JudgeFailed`` carrying ``caption_id``.
    """
    return evaluate_pair_detailed(pred, ref, cfg, providers, caption_id, cache).report
