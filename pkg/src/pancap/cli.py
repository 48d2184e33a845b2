"""Command-line entry point: ``pancap {evaluate,extract,chain,engine,stats,fixtures}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from . import batch
from .chain import build_training_tuples, run_chain
from .engine import RegionSet, load_region_sets, run_engine
from .errors import AllTied, DegenerateVariance, NewerReportSchema, PancapError
from .evaluate import Providers
from .fixtures import emit_corpus
from .llm.extraction import extract_semantic_content
from .llm.factory import make_chat, make_embedder
from .llm.mocks import EntityCaptionerChat
from .llm.profiles import ProviderProfile, load_profiles
from .matching import SynonymLexicon
from .stats import agreement_row, load_ratings
from .types import EvalConfig

EX_OK, EX_PAIR_FAILURE, EX_USAGE, EX_IOERR = 0, 2, 64, 74

log = logging.getLogger("pancap")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class Settings:
    cfg: Any
    lexicon: SynonymLexicon = field(default_factory=SynonymLexicon)
    profiles: dict[str, ProviderProfile] = field(default_factory=dict)
    roles: dict[str, str] = field(default_factory=dict)

    def profile(self, name: str) -> ProviderProfile:
        try:
            return self.profiles[name]
        except KeyError:
            raise UsageError(f"unknown profile {name!r}") from None

    def providers(self, mock: bool) -> Providers:
        if mock:
            return Providers.mock(lexicon=self.lexicon)
        missing = [r for r in ("extractor", "embedder", "generator", "judge") if r not in self.roles]
        if missing:
            raise UsageError(f"config lacks provider roles {missing}; pass --mock for offline mode")
        return Providers(make_chat(self.profile(self.roles["extractor"])),
                         make_embedder(self.profile(self.roles["embedder"])),
                         make_chat(self.profile(self.roles["generator"])),
                         make_chat(self.profile(self.roles["judge"])), self.lexicon)


def load_settings(config: Optional[str], lexicon: Optional[str] = None) -> Settings:
    data: dict[str, Any] = {}
    base = Path(".")
    if config:
        with open(config, encoding="utf-8") as fh:
            data = json.load(fh)
        base = Path(config).parent
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
    try:
        cfg = EvalConfig.from_dict(data.get("eval", {}))
        profiles = load_profiles(data.get("profiles", []))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad config: {exc}") from exc
    lex_path = lexicon or (str(base / data["lexicon"]) if data.get("lexicon") else None)
    lex = SynonymLexicon.load(lex_path) if lex_path else SynonymLexicon()
    return Settings(cfg, lex, profiles, dict(data.get("roles", {})))


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _workers(value: Optional[int], cap: int) -> int:
    return value if value else max(1, min(os.cpu_count() or 1, cap))


# -- commands -------------------------------------------------------------------


def cmd_evaluate(args: argparse.Namespace) -> int:
    settings = load_settings(args.config, args.lexicon)
    providers = settings.providers(args.mock)
    try:
        items = batch.load_items(args.pred, args.ref)
    except ValueError as exc:
        raise OSError(f"unreadable input: {exc}") from exc
    audit: Optional[list[dict[str, Any]]] = [] if args.audit else None
    report = batch.run_batch(items, settings.cfg, providers,
                             _workers(args.workers, providers.judge.profile.max_in_flight), audit)
    if args.audit:
        _emit("".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in audit), args.audit)
    if args.out:
        batch.write_report(report, args.out)
    else:
        sys.stdout.write(batch.dumps_report(report))
    for pair in report["pairs"]:
        if "error" in pair:
            print(f"pair {pair['id']} failed: {pair['error']['message']}", file=sys.stderr)
    return EX_PAIR_FAILURE if report["failures"] else EX_OK


def cmd_extract(args: argparse.Namespace) -> int:
    settings = load_settings(args.config)
    providers = settings.providers(args.mock)
    text = Path(args.caption).read_text(encoding="utf-8")
    content = extract_semantic_content(text, providers.extractor, args.caption)
    _emit(json.dumps(content.to_dict(), sort_keys=True, indent=2) + "\n", args.out)
    return EX_OK


def cmd_chain(args: argparse.Namespace) -> int:
    settings = load_settings(args.config)
    if args.tuples_from:
        rows = [json.loads(line) for line in Path(args.tuples_from).read_text(encoding="utf-8").splitlines()
                if line.strip()]
        lines = []
        for row in rows:
            for t in build_training_tuples(row["image"], row["caption"], args.seed):
                lines.append(json.dumps(t.to_dict(), sort_keys=True, ensure_ascii=False))
        _emit("".join(line + "\n" for line in lines), args.out)
        return EX_OK
    if not (args.image and args.profile):
        raise UsageError("chain needs --image and --profile (or --tuples-from)")
    provider = make_chat(settings.profile(args.profile))
    caption, trace = run_chain(args.image, provider, settings.cfg)
    if args.trace:
        Path(args.trace).write_text(json.dumps(trace.to_dict(), sort_keys=True, indent=2) + "\n",
                                    encoding="utf-8")
    _emit(caption.raw_text + "\n", args.out)
    return EX_OK


def cmd_engine(args: argparse.Namespace) -> int:
    settings = load_settings(args.config, args.lexicon)
    providers = settings.providers(args.mock)
    if args.mock:
        captioner, checker = EntityCaptionerChat(), EntityCaptionerChat()
    else:
        if len(args.profile or []) != 2:
            raise UsageError("engine needs exactly two --profile values (captioner, checker)")
        captioner, checker = (make_chat(settings.profile(n)) for n in args.profile)
    try:
        agnostic = load_region_sets(args.regions)
        aware = {r.image: r for r in load_region_sets(args.regions_aware)}
    except (ValueError, KeyError, TypeError) as exc:
        raise OSError(f"unreadable region file: {exc}") from exc

    def one(r):
        try:
            rec = run_engine(r, aware.get(r.image, RegionSet("class-aware", (), r.image)),
                             captioner, checker, settings.cfg, providers)
            return rec.to_dict()
        except (PancapError, ValueError) as exc:
            return {"image": r.image, "error": {"type": type(exc).__name__, "message": str(exc)}}

    with ThreadPoolExecutor(max_workers=_workers(args.workers, captioner.profile.max_in_flight)) as pool:
        rows = list(pool.map(one, agnostic))
    _emit("".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows), args.out)
    return EX_PAIR_FAILURE if any("error" in r for r in rows) else EX_OK


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        samples = load_ratings(args.ratings)
    except (ValueError, KeyError, TypeError) as exc:
        raise OSError(f"unreadable ratings file: {exc}") from exc
    try:
        print(agreement_row(samples))
    except (DegenerateVariance, AllTied) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_USAGE
    return EX_OK


def cmd_fixtures(args: argparse.Namespace) -> int:
    written = emit_corpus(args.emit)
    golden = Path(args.emit) / "golden-01"
    settings = load_settings(str(golden / "config.json"))
    report = batch.run_batch(batch.load_items(golden / "pred.jsonl", golden / "ref.jsonl"),
                             settings.cfg, settings.providers(True), workers=1)
    batch.write_report(report, golden / "expected_report.json")
    for path in written + [golden / "expected_report.json"]:
        print(path)
    return EX_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pancap", description="Panoptic caption scoring and generation pipelines.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ev = sub.add_parser("evaluate", help="score predictions against references")
    ev.add_argument("--pred", required=True, help="JSON lines with id and prediction")
    ev.add_argument("--ref", help="JSON lines with id and reference (default: read both from --pred)")
    ev.add_argument("--config", help="JSON config: eval settings, lexicon, profiles, roles")
    ev.add_argument("--lexicon", help="synonym lexicon JSON (overrides the config)")
    ev.add_argument("--out", help="report path (default: stdout)")
    ev.add_argument("--mock", action="store_true", help="use the offline oracle providers")
    ev.add_argument("--workers", type=int, help="pairs evaluated concurrently")
    ev.add_argument("--audit", help="write every question and verdict here as JSON lines")
    ev.set_defaults(func=cmd_evaluate)

    ex = sub.add_parser("extract", help="dump the semantic content of one caption")
    ex.add_argument("--caption", required=True)
    ex.add_argument("--config")
    ex.add_argument("--mock", action="store_true")
    ex.add_argument("--out")
    ex.set_defaults(func=cmd_extract)

    ch = sub.add_parser("chain", help="run the four-stage captioner, or build its training tuples")
    ch.add_argument("--image")
    ch.add_argument("--profile", help="multimodal profile name from --config")
    ch.add_argument("--trace", help="write the stage trace JSON here")
    ch.add_argument("--config")
    ch.add_argument("--out")
    ch.add_argument("--tuples-from", help="JSON lines of {image, caption}; writes training tuples")
    ch.add_argument("--seed", type=int, default=0)
    ch.set_defaults(func=cmd_chain)

    en = sub.add_parser("engine", help="merge detector regions, caption twice and filter")
    en.add_argument("--regions", required=True, help="class-agnostic region file")
    en.add_argument("--regions-aware", required=True, help="class-aware region file")
    en.add_argument("--profile", action="append", help="captioner then checker profile")
    en.add_argument("--config")
    en.add_argument("--lexicon")
    en.add_argument("--mock", action="store_true")
    en.add_argument("--out", help="manifest path (default: stdout)")
    en.add_argument("--workers", type=int)
    en.set_defaults(func=cmd_engine)

    st = sub.add_parser("stats", help="agreement between machine scores and human ratings")
    st.add_argument("--ratings", required=True)
    st.set_defaults(func=cmd_stats)

    fx = sub.add_parser("fixtures", help="write the fixture corpus")
    fx.add_argument("--emit", required=True, metavar="DIR")
    fx.set_defaults(func=cmd_fixtures)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pancap: {exc}", file=sys.stderr)
        return EX_USAGE
    except (OSError, NewerReportSchema) as exc:
        print(f"pancap: {exc}", file=sys.stderr)
        return EX_IOERR
    except json.JSONDecodeError as exc:
        print(f"pancap: invalid JSON input: {exc}", file=sys.stderr)
        return EX_IOERR
    except PancapError as exc:
        print(f"pancap: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
