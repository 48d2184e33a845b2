"""Batch evaluation over JSON-lines inputs and the versioned JSON report."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from .errors import CaptionFailure, NewerReportSchema, PancapError
from .evaluate import CaptionInput, Evaluation, ExtractionCache, PreExtracted, Providers, evaluate_pair_detailed
from .llm.prompts import template_versions
from .qa import verdict_record
from .scoring import overall_score, score_counts
from .types import SCORE_DIMENSIONS, DimensionCounts, EvalConfig, PancapReport, SemanticContent

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class BatchItem:
    id: str
    prediction: Optional[CaptionInput]
    reference: Optional[CaptionInput]


def caption_input(entry: Any) -> CaptionInput:
    """A caption string, or ``{"caption": ..., "content": {...}}`` for pre-extracted content."""
    if isinstance(entry, str):
        return entry
    if isinstance(entry, dict):
        if "content" in entry and entry["content"] is not None:
            return PreExtracted(SemanticContent.from_dict(entry["content"]), entry.get("caption"))
        if isinstance(entry.get("caption"), str):
            return entry["caption"]
    raise ValueError(f"unrecognised caption entry: {str(entry)[:80]}")


def _read_jsonl(path: Union[str, Path]) -> list[dict[str, Any]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(row, dict) or "id" not in row:
                raise ValueError(f"{path}:{lineno}: each line needs an \"id\"")
            rows.append(row)
    return rows


def load_items(pred_path: Union[str, Path], ref_path: Optional[Union[str, Path]] = None) -> list[BatchItem]:
    """Pair predictions with references by id, keeping prediction order.

    With a single file each line carries both ``prediction`` and ``reference``.
    Unparseable caption entries are kept as ``None`` and reported per pair.
    """
    preds = _read_jsonl(pred_path)
    refs = _read_jsonl(ref_path) if ref_path is not None else preds
    ref_by_id: dict[str, Any] = {}
    for row in refs:
        key = str(row["id"])
        if key in ref_by_id:
            raise ValueError(f"duplicate reference id {key!r}")
        ref_by_id[key] = row.get("reference")
    items, seen = [], set()
    for row in preds:
        key = str(row["id"])
        if key in seen:
            raise ValueError(f"duplicate prediction id {key!r}")
        seen.add(key)
        items.append(BatchItem(key, _safe_input(row.get("prediction")), _safe_input(ref_by_id.get(key))))
    return items


def _safe_input(entry: Any) -> Optional[CaptionInput]:
    if entry is None:
        return None
    try:
        return caption_input(entry)
    except (ValueError, PancapError) as exc:
        log.warning("bad caption entry: %s", exc)
        return None


def _error_record(exc: BaseException) -> dict[str, Any]:
    return {"type": type(exc).__name__, "message": str(exc),
            "caption_id": getattr(exc, "caption_id", None)}


def audit_records(pair_id: str, ev: Evaluation) -> list[dict[str, Any]]:
    """Question/verdict rows for one pair: precision side first, then recall side."""
    rows = []
    for direction, qa in (("pred->ref", ev.precision_qa), ("ref->pred", ev.recall_qa)):
        for pair, verdict in zip(qa.pairs, qa.verdicts):
            rows.append({"id": pair_id, "direction": direction, **verdict_record(pair, verdict)})
        for item in qa.dropped:
            rows.append({"id": pair_id, "direction": direction, "item": item.statement,
                         "dimension": item.dimension, "dropped": True, "correct": False})
    return rows


def _evaluate_item(item: BatchItem, cfg: EvalConfig, providers: Providers,
                   cache: ExtractionCache) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    if item.prediction is None or item.reference is None:
        missing = "prediction" if item.prediction is None else "reference"
        return {"id": item.id, "error": {"type": "MissingInput", "message": f"no usable {missing}",
                                         "caption_id": item.id}}, []
    try:
        ev = evaluate_pair_detailed(item.prediction, item.reference, cfg, providers, item.id, cache)
    except (CaptionFailure, PancapError, ValueError) as exc:
        log.error("pair %s failed: %s", item.id, exc)
        return {"id": item.id, "error": _error_record(exc)}, []
    return {"id": item.id, "report": ev.report.to_dict()}, audit_records(item.id, ev)


def summarize(reports: Sequence[PancapReport], lambda_g: float) -> dict[str, Any]:
    """Per-caption means and scores recomputed from counts pooled over the corpus."""
    if not reports:
        return {"n": 0, "mean": None, "pooled": None}
    n = len(reports)
    mean: dict[str, Any] = {}
    for dim in SCORE_DIMENSIONS:
        scores = [getattr(r, dim) for r in reports]
        mean[dim] = {k: sum(getattr(s, k) for s in scores) / n for k in ("precision", "recall", "f1")}
    mean["overall"] = sum(r.overall for r in reports) / n

    pooled: dict[str, Any] = {}
    for dim in SCORE_DIMENSIONS:
        c = DimensionCounts(*(sum(getattr(r.counts[dim], f) for r in reports)
                              for f in ("pred_correct", "pred_total", "ref_correct", "ref_total")))
        pooled[dim] = {"counts": c.to_dict(), **score_counts(c).to_dict()}
    pooled["overall"] = overall_score(*(pooled[d]["f1"] for d in SCORE_DIMENSIONS), lambda_g=lambda_g)
    return {"n": n, "mean": mean, "pooled": pooled}


def run_batch(items: Sequence[BatchItem], cfg: EvalConfig, providers: Providers,
              workers: Optional[int] = None,
              audit: Optional[list[dict[str, Any]]] = None) -> dict[str, Any]:
    """Evaluate every item and assemble the report document (input order, no timestamps).

    When ``audit`` is a list, every question/verdict row is appended to it.
    """
    if workers is None:
        workers = min(os.cpu_count() or 1, providers.judge.profile.max_in_flight)
    cache = ExtractionCache()
    if workers <= 1:
        results = [_evaluate_item(it, cfg, providers, cache) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda it: _evaluate_item(it, cfg, providers, cache), items))
    rows = [row for row, _ in results]
    if audit is not None:
        for _, records in results:
            audit.extend(records)
    ok = [PancapReport.from_dict(r["report"]) for r in rows if "report" in r]
    failures = [r["id"] for r in rows if "error" in r]
    return {
        "schema_version": SCHEMA_VERSION,
        "templates": template_versions(),
        "config": cfg.to_dict(),
        "pairs": rows,
        "failures": failures,
        "summary": summarize(ok, cfg.lambda_g),
    }


def dumps_report(report: dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_report(report: dict[str, Any], path: Union[str, Path]) -> None:
    """Write ``report``, refusing to replace one from a newer schema version."""
    target = Path(path)
    if target.exists():
        try:
            existing = json.loads(target.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError):
            existing = None
        version = existing.get("schema_version") if isinstance(existing, dict) else None
        if isinstance(version, int) and version > report["schema_version"]:
            raise NewerReportSchema(
                f"{target} has schema version {version}, newer than {report['schema_version']}")
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_text(dumps_report(report), encoding="utf-8")
    tmp.replace(target)
