"""Panoptic caption evaluation (PancapScore) and caption-generation pipelines."""

from .captions import PanopticCaption, parse_caption
from .evaluate import PreExtracted, Providers, evaluate_pair, evaluate_pair_detailed
from .matching import SynonymLexicon, iou, match_instances
from .scoring import overall_score, prf
from .types import (
    BoundingBox,
    DimensionScore,
    EntityInstance,
    EvalConfig,
    MatchResult,
    PancapReport,
    SemanticContent,
    SemanticItem,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "DimensionScore",
    "EntityInstance",
    "EvalConfig",
    "MatchResult",
    "PancapReport",
    "PanopticCaption",
    "PreExtracted",
    "Providers",
    "SemanticContent",
    "SemanticItem",
    "SynonymLexicon",
    "evaluate_pair",
    "evaluate_pair_detailed",
    "iou",
    "match_instances",
    "overall_score",
    "parse_caption",
    "prf",
]
