"""Command-line surface.

Verbs: review, extract, match, analyze, shuffle, validate, aspects.
Exit codes: 0 success, 1 partial (skips or warnings occurred), 2 failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .aspects import AspectSchema, aspect_frequencies, frequency_ratio, load_annotations
from .config import RunConfig, make_gateway
from .corpus import load_corpus
from .errors import ReviewScopeError
from .extraction import CommentList, extract_comments, EXTRACTION_TEMPLATE
from .ingest import ParseServiceConfig, load_parsed_document, parse_pdf
from .matching import assign_one_to_one, filter_threshold, match_comments, match_set_to_json, RawMatch, MatchSet
from .pipeline import RunLedger, dump_json, run_analysis, run_review, run_shuffle, _safe_name
from .validation import (
    ConfusionCounts,
    MatchAnnotation,
    evaluate_matching,
    majority_f1,
    pairwise_agreement,
    prf,
)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--mode", choices=("live", "record", "replay"))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threshold", type=int)
    parser.add_argument("--control", dest="control_enabled",
                        action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--out", dest="out_dir", help="output directory for runs")
    parser.add_argument("--transcripts", dest="transcripts_dir", help="transcript store directory")
    parser.add_argument("--run-id", dest="run_id")
    parser.add_argument("--model", dest="model_id")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reviewscope",
        description="Generate structured scientific feedback and run the "
                    "retrospective comment-overlap analyses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_review = sub.add_parser("review", help="generate four-section feedback for one paper")
    p_review.add_argument("--input", help="pre-parsed document JSON (offline mode)")
    p_review.add_argument("--pdf", help="paper PDF to send to the parse service")
    p_review.add_argument("--parse-endpoint", help="PDF parse service URL")
    p_review.add_argument("--flavor", choices=("nature_family", "ml_conference"))
    p_review.add_argument("--paper-id", default=None)
    _add_common_flags(p_review)

    p_extract = sub.add_parser("extract", help="extract criticism points from a feedback text")
    p_extract.add_argument("--feedback", required=True,
                           help="feedback artifact JSON or plain-text review")
    p_extract.add_argument("--feedback-id", default="")
    p_extract.add_argument("--prefix", default="A", choices=("A", "B"))
    _add_common_flags(p_extract)

    p_match = sub.add_parser("match", help="match two extracted comment lists")
    p_match.add_argument("--list-a", required=True)
    p_match.add_argument("--list-b", required=True)
    _add_common_flags(p_match)

    p_analyze = sub.add_parser("analyze", help="full overlap analysis over a corpus")
    p_analyze.add_argument("--corpus", dest="corpus_path")
    p_analyze.add_argument("--strata", dest="strata_kind",
                           choices=("by_venue", "by_decision", "by_category_set", "by_year"))
    _add_common_flags(p_analyze)

    p_shuffle = sub.add_parser("shuffle", help="shuffled-feedback null experiment")
    p_shuffle.add_argument("--corpus", dest="corpus_path")
    p_shuffle.add_argument("--rule", choices=("nature_journal_and_category_set", "iclr_year"))
    _add_common_flags(p_shuffle)

    p_validate = sub.add_parser("validate", help="human-verification arithmetic")
    p_validate.add_argument("--kind", required=True, choices=("extraction", "matching"))
    p_validate.add_argument("--counts", help="confusion counts JSON (extraction kind)")
    p_validate.add_argument("--predicted", help="predicted match set JSON (matching kind)")
    p_validate.add_argument("--consensus", help="consensus labels JSONL (matching kind)")
    p_validate.add_argument("--annotations", help="per-annotator labels JSONL (optional)")
    _add_common_flags(p_validate)

    p_aspects = sub.add_parser("aspects", help="aspect frequencies and model/human ratios")
    p_aspects.add_argument("--annotations", required=True)
    p_aspects.add_argument("--schema", help="aspect schema JSON (defaults to the built-in one)")
    p_aspects.add_argument("--smoothing", type=float, default=0.0)
    _add_common_flags(p_aspects)

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    for name in ("mode", "seed", "threshold", "control_enabled", "out_dir",
                 "transcripts_dir", "run_id", "model_id", "corpus_path",
                 "strata_kind", "flavor"):
        if hasattr(args, name) and getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    return config.with_overrides(**overrides)


def _load_feedback_text(path: Path) -> str:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        obj = json.loads(text)
        return obj.get("raw_text", text)
    return text


def _cmd_review(args, config: RunConfig) -> int:
    if not args.input and not args.pdf:
        raise ReviewScopeError("review needs --input (pre-parsed JSON) or --pdf")
    if args.input:
        document = load_parsed_document(args.input)
    else:
        if not args.parse_endpoint:
            raise ReviewScopeError("--pdf requires --parse-endpoint")
        pdf_bytes = Path(args.pdf).read_bytes()
        document = parse_pdf(pdf_bytes, ParseServiceConfig(endpoint=args.parse_endpoint))
    paper_id = args.paper_id or document.title
    gateway = make_gateway(config)
    payload, run_dir, code = run_review(config, gateway, document, paper_id)
    print(f"feedback written to {run_dir / 'feedback'}")
    for name in payload["sections"]:
        print(f"  section {name}: {len(payload['sections'][name])} chars")
    return code


def _cmd_extract(args, config: RunConfig) -> int:
    text = _load_feedback_text(Path(args.feedback))
    gateway = make_gateway(config)
    template = config.extraction_template() or EXTRACTION_TEMPLATE
    result = extract_comments(text, gateway, config.model_id, list_prefix=args.prefix,
                              feedback_id=args.feedback_id or Path(args.feedback).stem,
                              template=template)
    run_dir = Path(config.out_dir) / config.effective_run_id("extract")
    ledger = RunLedger(run_id=run_dir.name, config=config.snapshot())
    ledger.add_keys("extraction", result.transcript_keys)
    name = _safe_name(result.comment_list.feedback_id) + ".json"
    dump_json(run_dir / "comments" / name, result.to_json())
    ledger.artifacts["comments"] = f"comments/{name}"
    ledger.write(run_dir)
    print(f"{len(result.comment_list)} comments -> {run_dir / 'comments' / name}")
    return 0


def _cmd_match(args, config: RunConfig) -> int:
    list_a = CommentList.from_json(json.loads(Path(args.list_a).read_text(encoding="utf-8")))
    list_b = CommentList.from_json(json.loads(Path(args.list_b).read_text(encoding="utf-8")))
    gateway = make_gateway(config)
    result = match_comments(list_a, list_b, gateway, config.model_id)
    filtered = filter_threshold(result.match_set, config.threshold)
    assigned = assign_one_to_one(filtered)
    run_dir = Path(config.out_dir) / config.effective_run_id("match")
    ledger = RunLedger(run_id=run_dir.name, config=config.snapshot())
    ledger.add_keys("matching", result.transcript_keys)
    name = _safe_name(f"{list_a.feedback_id}__{list_b.feedback_id}") + ".json"
    dump_json(run_dir / "matches" / name, match_set_to_json(filtered, assigned))
    ledger.artifacts["matches"] = f"matches/{name}"
    ledger.warnings.extend(filtered.warnings)
    ledger.write(run_dir)
    print(f"{len(filtered.matches)} matches at threshold {config.threshold} "
          f"-> {run_dir / 'matches' / name}")
    return 1 if filtered.warnings else 0


def _cmd_analyze(args, config: RunConfig) -> int:
    manifest = load_corpus(config.require_corpus())
    gateway = make_gateway(config)
    report, run_dir, code = run_analysis(config, manifest, gateway)
    print(f"analysis report in {run_dir / 'reports'}")
    print(f"  scored pairs: {len(report.pairs)}, skips: {len(report.skips)}")
    for kind in sorted(report.summary):
        cell = report.summary[kind]["overall"].get("hit_rate")
        if cell:
            print(f"  {kind} mean hit rate: {cell['mean']:.4f} "
                  f"[{cell['ci_low']:.4f}, {cell['ci_high']:.4f}] (n={cell['n']})")
    return code


def _cmd_shuffle(args, config: RunConfig) -> int:
    manifest = load_corpus(config.require_corpus())
    gateway = make_gateway(config)
    comparison, run_dir, code = run_shuffle(config, manifest, gateway, rule=args.rule)
    print(f"shuffle comparison in {run_dir / 'reports'}")
    for condition in ("original", "shuffled"):
        block = comparison[condition].get("gpt_vs_human", {}).get("overall", {})
        if "hit_rate" in block:
            print(f"  {condition} gpt_vs_human mean hit rate: {block['hit_rate']['mean']:.4f}")
    if comparison["excluded_papers"]:
        print(f"  excluded (singleton groups): {', '.join(comparison['excluded_papers'])}")
    return code


def _print_prf(label: str, result) -> None:
    print(f"{label}: precision {result.precision:.3f} recall {result.recall:.3f} "
          f"f1 {result.f1:.3f}" + (" (degenerate)" if result.degenerate else ""))


def _read_annotations(path: Path) -> list[MatchAnnotation]:
    out = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(MatchAnnotation(pair_id=str(obj["pair_id"]),
                                       annotator_id=str(obj["annotator_id"]),
                                       label=str(obj["label"])))
    return out


def _cmd_validate(args, config: RunConfig) -> int:
    report: dict = {"kind": args.kind}
    if args.kind == "extraction":
        if not args.counts:
            raise ReviewScopeError("validate --kind extraction requires --counts")
        obj = json.loads(Path(args.counts).read_text(encoding="utf-8"))
        counts = ConfusionCounts(tp=int(obj["tp"]), fp=int(obj["fp"]), fn=int(obj["fn"]),
                                 tn=int(obj["tn"]) if "tn" in obj else None)
        result = prf(counts)
        _print_prf("extraction", result)
        report["counts"] = {"tp": counts.tp, "fp": counts.fp, "fn": counts.fn, "tn": counts.tn}
        report["prf"] = {"precision": result.precision, "recall": result.recall,
                         "f1": result.f1, "degenerate": result.degenerate}
    else:
        if not args.predicted or not args.consensus:
            raise ReviewScopeError("validate --kind matching requires --predicted and --consensus")
        predicted_obj = json.loads(Path(args.predicted).read_text(encoding="utf-8"))
        matches = tuple(
            RawMatch(a_id=str(m["a_id"]), b_id=str(m["b_id"]),
                     similarity=int(m["similarity"]), rationale=str(m.get("rationale", "")))
            for m in predicted_obj.get("matches", [])
        )
        predicted = MatchSet(list_a_id=str(predicted_obj.get("list_a_id", "A")),
                             list_b_id=str(predicted_obj.get("list_b_id", "B")),
                             matches=matches,
                             threshold_applied=predicted_obj.get("threshold"))
        consensus: dict[str, str] = {}
        with Path(args.consensus).open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    consensus[str(obj["pair_id"])] = str(obj["label"])
        counts = evaluate_matching(predicted, consensus, universe=consensus.keys())
        result = prf(counts)
        print(f"matching confusion: tp {counts.tp} fp {counts.fp} fn {counts.fn} tn {counts.tn}")
        _print_prf("matching", result)
        report["counts"] = {"tp": counts.tp, "fp": counts.fp, "fn": counts.fn, "tn": counts.tn}
        report["prf"] = {"precision": result.precision, "recall": result.recall,
                         "f1": result.f1, "degenerate": result.degenerate}
        if args.annotations:
            annotations = _read_annotations(Path(args.annotations))
            agreement = pairwise_agreement(annotations)
            print(f"pairwise agreement: {agreement:.3f}")
            report["pairwise_agreement"] = agreement
            per_annotator = majority_f1(annotations)
            report["majority_f1"] = {}
            for annotator, res in sorted(per_annotator.items()):
                _print_prf(f"annotator {annotator} vs majority", res)
                report["majority_f1"][annotator] = res.f1
    run_dir = Path(config.out_dir) / config.effective_run_id("validate")
    ledger = RunLedger(run_id=run_dir.name, config=config.snapshot())
    dump_json(run_dir / "reports" / "validation.json", report)
    ledger.artifacts["validation"] = "reports/validation.json"
    ledger.write(run_dir)
    return 0


def _cmd_aspects(args, config: RunConfig) -> int:
    schema = AspectSchema.from_file(args.schema) if args.schema else AspectSchema()
    annotations = load_annotations(args.annotations, schema)
    freqs = {}
    for source in ("llm", "human"):
        try:
            freqs[source] = aspect_frequencies(annotations, source, schema)
        except ValueError:
            freqs[source] = None
    report: dict = {"schema": [a.aspect_id for a in schema.aspects], "frequencies": freqs}
    if freqs["llm"] is not None and freqs["human"] is not None:
        ratios = frequency_ratio(freqs["llm"], freqs["human"], smoothing=args.smoothing)
        report["ratio_llm_over_human"] = ratios
        report["smoothing"] = args.smoothing
        for aspect_id in schema.ids():
            ratio = ratios[aspect_id]
            shown = "undefined" if ratio is None else f"{ratio:.3f}"
            print(f"{aspect_id}: llm {freqs['llm'][aspect_id]:.3f} "
                  f"human {freqs['human'][aspect_id]:.3f} ratio {shown}")
    run_dir = Path(config.out_dir) / config.effective_run_id("aspects")
    ledger = RunLedger(run_id=run_dir.name, config=config.snapshot())
    dump_json(run_dir / "reports" / "aspects.json", report)
    ledger.artifacts["aspects"] = "reports/aspects.json"
    ledger.write(run_dir)
    return 0


_HANDLERS = {
    "review": _cmd_review,
    "extract": _cmd_extract,
    "match": _cmd_match,
    "analyze": _cmd_analyze,
    "shuffle": _cmd_shuffle,
    "validate": _cmd_validate,
    "aspects": _cmd_aspects,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        return _HANDLERS[args.command](args, config)
    except (ReviewScopeError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
