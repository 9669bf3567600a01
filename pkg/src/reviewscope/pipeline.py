"""Batch drivers tying the stages together, run persistence, and report
writers.

A run directory looks like:

    runs/<run_id>/
      ledger.json     config snapshot, transcript keys, artifacts, warnings
      feedback/       generated feedback, one JSON per paper
      comments/       extracted comment lists
      matches/        match sets with assignments
      reports/        analysis / shuffle / validation / aspect reports

Report files never embed timestamps, absolute paths, or the run id, so a
replayed run reproduces them byte for byte.
"""
from __future__ import annotations

import csv
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .config import RunConfig
from .corpus import CorpusManifest, stratify
from .errors import ReviewScopeError
from .extraction import EXTRACTION_TEMPLATE, CommentList, comment_ordinal, extract_comments
from .feedback import GeneratedFeedback, generate_feedback
from .gateway import Gateway, SamplingParams
from .ingest import ParsedDocument
from .matching import (
    AssignedMatching,
    MatchSet,
    assign_one_to_one,
    filter_threshold,
    match_comments,
    match_set_to_json,
)
from .metrics import (
    ControlPolicy,
    OverlapScores,
    QuartileRates,
    StratumReport,
    apply_control,
    overlap_scores,
    pearson_r,
    plan_shuffle,
    positional_quartile_rates,
    recall_by_reviewer_count,
    summarize_values,
)

Matcher = Callable[[CommentList, CommentList], MatchSet]

PAIR_KINDS = ("gpt_vs_human", "gpt_vs_any_human", "human_vs_human", "human_vs_human_controlled")


def dump_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8")


@dataclass
class RunLedger:
    run_id: str
    config: dict
    transcript_keys: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def add_keys(self, stage: str, keys) -> None:
        bucket = self.transcript_keys.setdefault(stage, [])
        bucket.extend(keys)

    def write(self, run_dir: Path) -> Path:
        payload = {
            "run_id": self.run_id,
            "config": self.config,
            "transcript_keys": {stage: sorted(set(keys))
                                for stage, keys in sorted(self.transcript_keys.items())},
            "artifacts": dict(sorted(self.artifacts.items())),
            "warnings": sorted(set(self.warnings)),
        }
        path = run_dir / "ledger.json"
        dump_json(path, payload)
        return path


@dataclass(frozen=True)
class PairScore:
    paper_id: str
    kind: str
    a_feedback_id: str
    b_feedback_id: str
    scores: OverlapScores

    def to_json(self) -> dict:
        out = {
            "paper_id": self.paper_id,
            "kind": self.kind,
            "a_feedback_id": self.a_feedback_id,
            "b_feedback_id": self.b_feedback_id,
        }
        if self.kind == "gpt_vs_any_human":
            # pooled comparison: only the hit rate against the union of
            # reviewers is defined
            out.update({"hit_rate": self.scores.hit_rate, "n_a": self.scores.n_a,
                        "matched_a_count": self.scores.matched_a_count})
        else:
            out.update(self.scores.as_dict())
        return out


@dataclass(frozen=True)
class SkipEntry:
    paper_id: str
    kind: str
    a_feedback_id: str
    b_feedback_id: str
    reason: str

    def to_json(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "kind": self.kind,
            "a_feedback_id": self.a_feedback_id,
            "b_feedback_id": self.b_feedback_id,
            "reason": self.reason,
        }


@dataclass
class AnalysisReport:
    pairs: list[PairScore]
    skips: list[SkipEntry]
    summary: dict
    recall_by_k: dict
    quartiles: QuartileRates
    correlation: dict | None
    settings: dict
    warnings: list[str]

    def to_json(self) -> dict:
        return {
            "pairs": [p.to_json() for p in self.pairs],
            "skips": [s.to_json() for s in self.skips],
            "summary": self.summary,
            "recall_by_reviewer_count": self.recall_by_k,
            "positional_quartiles": self.quartiles.to_json(),
            "correlation": self.correlation,
            "settings": self.settings,
            "warnings": sorted(self.warnings),
        }


@dataclass
class _PaperOutcome:
    paper_id: str
    pairs: list[PairScore] = field(default_factory=list)
    skips: list[SkipEntry] = field(default_factory=list)
    recall_counts: Mapping[str, int] = field(default_factory=dict)
    recall_links: list = field(default_factory=list)
    recall_hits: set = field(default_factory=set)
    quartile_lists: list = field(default_factory=list)
    failed: bool = False


def _score_pair(matcher: Matcher, list_a: CommentList, list_b: CommentList,
                threshold: int) -> tuple[OverlapScores, MatchSet, AssignedMatching]:
    raw = matcher(list_a, list_b)
    filtered = filter_threshold(raw, threshold)
    assigned = assign_one_to_one(filtered)
    return overlap_scores(assigned, len(list_a), len(list_b)), filtered, assigned


def _analyze_paper(
    paper_id: str,
    llm_list: CommentList | None,
    human_lists: Sequence[CommentList],
    matcher: Matcher,
    threshold: int,
    control: ControlPolicy,
    include_human_pairs: bool,
) -> _PaperOutcome:
    out = _PaperOutcome(paper_id=paper_id)
    gpt_id = llm_list.feedback_id if llm_list is not None else f"{paper_id}:llm"

    def skip(kind, a, b, reason):
        out.skips.append(SkipEntry(paper_id, kind, a, b, reason))

    if llm_list is None:
        skip("gpt_vs_human", gpt_id, "*", "no model feedback for paper")
        out.failed = True
        return out
    if not human_lists:
        skip("gpt_vs_human", gpt_id, "*", "paper has no reviews")
        out.failed = True
        return out

    any_matched_a: set[str] = set()
    any_pairs_scored = 0
    for idx, human in enumerate(human_lists):
        kind = "gpt_vs_human"
        if len(llm_list) == 0:
            skip(kind, gpt_id, human.feedback_id, "empty model comment list (n_a = 0)")
            continue
        if len(human) == 0:
            skip(kind, gpt_id, human.feedback_id, "empty human comment list (n_b = 0)")
            continue
        try:
            scores, filtered, _ = _score_pair(matcher, llm_list, human, threshold)
        except ReviewScopeError as exc:
            skip(kind, gpt_id, human.feedback_id, f"matching failed: {exc}")
            continue
        out.pairs.append(PairScore(paper_id, kind, gpt_id, human.feedback_id, scores))
        any_pairs_scored += 1
        any_matched_a.update(m.a_id for m in filtered.matches)
        for m in filtered.matches:
            out.recall_hits.add((idx, comment_ordinal(m.b_id)))
    if any_pairs_scored and len(llm_list) > 0:
        # pooled comparison against all reviewers: only the hit rate is
        # meaningful, and serialization drops the placeholder fields
        pooled = OverlapScores(
            hit_rate=len(any_matched_a) / len(llm_list),
            overlap_coefficient=0.0, jaccard=0.0, dice=0.0,
            m=0, n_a=len(llm_list), n_b=sum(len(h) for h in human_lists),
            matched_a_count=len(any_matched_a),
        )
        out.pairs.append(PairScore(paper_id, "gpt_vs_any_human", gpt_id, "*", pooled))

    out.recall_counts = {idx: len(h) for idx, h in enumerate(human_lists)}
    out.quartile_lists = [
        (len(h), {ordinal for (i, ordinal) in out.recall_hits if i == idx})
        for idx, h in enumerate(human_lists) if len(h) > 0
    ]

    if include_human_pairs:
        for i in range(len(human_lists)):
            for j in range(i + 1, len(human_lists)):
                first, second = human_lists[i], human_lists[j]
                if len(first) == 0 or len(second) == 0:
                    skip("human_vs_human", first.feedback_id, second.feedback_id,
                         "empty comment list")
                    continue
                try:
                    scores, filtered, _ = _score_pair(matcher, first, second, threshold)
                except ReviewScopeError as exc:
                    skip("human_vs_human", first.feedback_id, second.feedback_id,
                         f"matching failed: {exc}")
                    continue
                out.pairs.append(PairScore(paper_id, "human_vs_human",
                                           first.feedback_id, second.feedback_id, scores))
                for m in filtered.matches:
                    out.recall_links.append(
                        ((i, comment_ordinal(m.a_id)), (j, comment_ordinal(m.b_id)))
                    )
                if control.enabled:
                    limit = len(llm_list)
                    truncated = apply_control(first, limit)
                    if len(truncated) == 0:
                        skip("human_vs_human_controlled", first.feedback_id, second.feedback_id,
                             f"control produced an empty set A (N = {limit})")
                        continue
                    try:
                        scores, _, _ = _score_pair(matcher, truncated, second, threshold)
                    except ReviewScopeError as exc:
                        skip("human_vs_human_controlled", first.feedback_id, second.feedback_id,
                             f"matching failed: {exc}")
                        continue
                    out.pairs.append(PairScore(paper_id, "human_vs_human_controlled",
                                               first.feedback_id, second.feedback_id, scores))
    out.failed = not out.pairs
    return out


def analyze_corpus(
    manifest: CorpusManifest,
    llm_lists: Mapping[str, CommentList],
    human_lists: Mapping[str, Sequence[CommentList]],
    matcher: Matcher,
    threshold: int = 7,
    control: ControlPolicy = ControlPolicy(),
    seed: int = 0,
    resamples: int = 1000,
    strata_kind: str = "by_venue",
    parallelism: int = 4,
    include_human_pairs: bool = True,
) -> AnalysisReport:
    """Score every comment-list pair of the corpus and aggregate.

    For each paper this computes model-vs-each-reviewer and (optionally)
    reviewer-vs-reviewer overlap with and without the comment-count control,
    pools recall-by-reviewer-count and positional quartiles, and summarizes
    per stratum with bootstrap confidence intervals. Per-pair failures are
    recorded as skips, never aborts. Aggregation is sorted by paper id, so
    results do not depend on worker scheduling."""
    paper_ids = sorted(p.paper_id for p in manifest.papers)

    def work(paper_id: str) -> _PaperOutcome:
        return _analyze_paper(
            paper_id,
            llm_lists.get(paper_id),
            list(human_lists.get(paper_id, [])),
            matcher,
            threshold,
            control,
            include_human_pairs,
        )

    if parallelism > 1 and len(paper_ids) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(work, paper_ids))
    else:
        outcomes = [work(pid) for pid in paper_ids]

    pairs: list[PairScore] = []
    skips: list[SkipEntry] = []
    warnings: list[str] = []
    recall_total = {bucket: [0, 0] for bucket in ("1", "2", "3+")}
    quartile_lists: list = []
    for outcome in outcomes:
        pairs.extend(outcome.pairs)
        skips.extend(outcome.skips)
        if outcome.recall_counts:
            per_paper = recall_by_reviewer_count(
                outcome.recall_counts, outcome.recall_links, outcome.recall_hits
            )
            for bucket, (hit, total) in per_paper.items():
                recall_total[bucket][0] += hit
                recall_total[bucket][1] += total
        quartile_lists.extend(outcome.quartile_lists)
    pairs.sort(key=lambda p: (p.paper_id, p.kind, p.a_feedback_id, p.b_feedback_id))
    skips.sort(key=lambda s: (s.paper_id, s.kind, s.a_feedback_id, s.b_feedback_id))

    # Per-paper means feed the bootstrap so each paper counts once.
    def paper_means(kind: str, metric: str) -> dict[str, float]:
        per_paper: dict[str, list[float]] = {}
        for pair in pairs:
            if pair.kind == kind:
                per_paper.setdefault(pair.paper_id, []).append(getattr(pair.scores, metric))
        return {pid: sum(vals) / len(vals) for pid, vals in per_paper.items()}

    strata = stratify(manifest, strata_kind)
    summary: dict = {}
    stratum_hit_means: dict[str, dict[str, float]] = {}
    for kind in PAIR_KINDS:
        metric_names = ("hit_rate",) if kind == "gpt_vs_any_human" else OverlapScores.METRIC_NAMES
        overall: dict = {}
        per_stratum: list[dict] = []
        means_by_metric = {metric: paper_means(kind, metric) for metric in metric_names}
        if not means_by_metric[metric_names[0]]:
            continue
        for metric, means in means_by_metric.items():
            overall[metric] = summarize_values(list(means.values()), seed=seed,
                                               resamples=resamples).to_json()
        for stratum, members in strata.items():
            scored_members = tuple(pid for pid in members if pid in means_by_metric[metric_names[0]])
            if not scored_members:
                continue
            summaries = {
                metric: summarize_values([means[pid] for pid in scored_members],
                                         seed=seed, resamples=resamples)
                for metric, means in means_by_metric.items()
            }
            stratum_report = StratumReport(stratum=stratum, summaries=summaries,
                                           paper_ids=scored_members)
            per_stratum.append(stratum_report.to_json())
            if "hit_rate" in summaries:
                stratum_hit_means.setdefault(kind, {})[stratum.value] = summaries["hit_rate"].mean
        summary[kind] = {"overall": overall, "strata": per_stratum}

    correlation = None
    gpt_means = stratum_hit_means.get("gpt_vs_human", {})
    human_kind = ("human_vs_human_controlled"
                  if control.enabled and "human_vs_human_controlled" in stratum_hit_means
                  else "human_vs_human")
    human_means = stratum_hit_means.get(human_kind, {})
    shared = sorted(set(gpt_means) & set(human_means))
    if len(shared) >= 3:
        xs = [gpt_means[v] for v in shared]
        ys = [human_means[v] for v in shared]
        try:
            r, p = pearson_r(xs, ys, seed=seed)
            correlation = {"metric": "hit_rate", "strata": shared,
                           "gpt_vs_human": xs, human_kind: ys, "r": r, "p": p}
        except ValueError as exc:
            warnings.append(f"correlation skipped: {exc}")
    else:
        warnings.append(
            f"correlation skipped: needs >= 3 strata with both comparisons, have {len(shared)}"
        )

    recall = {
        bucket: {"hits": hit, "total": total, "rate": (hit / total if total else 0.0)}
        for bucket, (hit, total) in recall_total.items()
    }
    return AnalysisReport(
        pairs=pairs,
        skips=skips,
        summary=summary,
        recall_by_k=recall,
        quartiles=positional_quartile_rates(quartile_lists),
        correlation=correlation,
        settings={
            "threshold": threshold,
            "control_enabled": control.enabled,
            "seed": seed,
            "resamples": resamples,
            "strata_kind": strata_kind,
        },
        warnings=warnings,
    )


class GatewayMatcher:
    """Matcher backed by gateway completions; collects transcript keys and
    persists every match set it produces."""

    def __init__(self, gateway: Gateway, model_id: str, threshold: int,
                 matches_dir: Path | None = None):
        self.gateway = gateway
        self.model_id = model_id
        self.threshold = threshold
        self.matches_dir = matches_dir
        self.transcript_keys: list[str] = []
        self._lock = threading.Lock()

    def __call__(self, list_a: CommentList, list_b: CommentList) -> MatchSet:
        result = match_comments(list_a, list_b, self.gateway, self.model_id)
        with self._lock:
            self.transcript_keys.extend(result.transcript_keys)
        if self.matches_dir is not None:
            filtered = filter_threshold(result.match_set, self.threshold)
            assigned = assign_one_to_one(filtered)
            name = _safe_name(f"{list_a.feedback_id}__{list_b.feedback_id}") + ".json"
            dump_json(self.matches_dir / name, match_set_to_json(filtered, assigned))
        return result.match_set


def _safe_name(raw: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in raw)


@dataclass
class CorpusExtraction:
    llm_lists: dict[str, CommentList]
    human_lists: dict[str, list[CommentList]]
    feedbacks: dict[str, GeneratedFeedback]
    review_keys: list[str]
    extraction_keys: list[str]
    warnings: list[str]
    parse_failures: dict[str, str]


def extract_corpus_lists(
    manifest: CorpusManifest,
    gateway: Gateway,
    config: RunConfig,
    run_dir: Path | None = None,
) -> CorpusExtraction:
    """Generate model feedback for every paper and extract comment lists from
    the model feedback and each human review. Failures are recorded per
    paper, with raw model text persisted so no completion is lost."""
    template = config.extraction_template() or EXTRACTION_TEMPLATE
    sampling = SamplingParams(temperature=config.review_temperature,
                              max_output_tokens=config.max_output_tokens)
    out = CorpusExtraction({}, {}, {}, [], [], [], {})
    feedback_dir = run_dir / "feedback" if run_dir else None
    comments_dir = run_dir / "comments" if run_dir else None

    def process(paper) -> None:
        try:
            generated = generate_feedback(
                paper, gateway, flavor=config.flavor, model_id=config.model_id,
                budget=config.budget(), sampling=sampling,
            )
        except ReviewScopeError as exc:
            raw = getattr(exc, "raw_text", "")
            if feedback_dir and raw:
                feedback_dir.mkdir(parents=True, exist_ok=True)
                (feedback_dir / f"{_safe_name(paper.paper_id)}.raw.txt").write_text(
                    raw, encoding="utf-8")
            out.parse_failures[paper.paper_id] = str(exc)
            out.warnings.append(f"paper {paper.paper_id}: feedback generation failed: {exc}")
            return
        out.feedbacks[paper.paper_id] = generated
        out.review_keys.append(generated.transcript_key)
        if feedback_dir:
            dump_json(feedback_dir / f"{_safe_name(paper.paper_id)}.json", generated.to_json())
        feedback_id = f"{paper.paper_id}:llm"
        try:
            extraction = extract_comments(
                generated.feedback.raw_text, gateway, config.model_id,
                feedback_id=feedback_id, template=template,
            )
        except ReviewScopeError as exc:
            out.parse_failures[paper.paper_id] = str(exc)
            out.warnings.append(f"paper {paper.paper_id}: model comment extraction failed: {exc}")
            return
        out.extraction_keys.extend(extraction.transcript_keys)
        out.llm_lists[paper.paper_id] = extraction.comment_list
        if comments_dir:
            dump_json(comments_dir / f"{_safe_name(feedback_id)}.json", extraction.to_json())
        lists = []
        for review in manifest.reviews_for(paper.paper_id):
            rid = f"{paper.paper_id}:{review.reviewer_id}"
            try:
                extracted = extract_comments(
                    review.raw_text, gateway, config.model_id,
                    feedback_id=rid, template=template,
                )
            except ReviewScopeError as exc:
                out.warnings.append(f"review {rid}: comment extraction failed: {exc}")
                continue
            out.extraction_keys.extend(extracted.transcript_keys)
            lists.append(extracted.comment_list)
            if comments_dir:
                dump_json(comments_dir / f"{_safe_name(rid)}.json", extracted.to_json())
        out.human_lists[paper.paper_id] = lists

    papers = sorted(manifest.papers, key=lambda p: p.paper_id)
    if config.parallelism > 1 and len(papers) > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            list(pool.map(process, papers))
    else:
        for paper in papers:
            process(paper)
    out.review_keys.sort()
    out.extraction_keys.sort()
    out.warnings.sort()
    return out


def write_analysis_reports(report: AnalysisReport, reports_dir: Path) -> dict[str, Path]:
    reports_dir.mkdir(parents=True, exist_ok=True)
    json_path = reports_dir / "analysis.json"
    dump_json(json_path, report.to_json())
    csv_path = reports_dir / "pairs.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["paper_id", "kind", "a_feedback_id", "b_feedback_id",
                         "hit_rate", "overlap_coefficient", "jaccard", "dice",
                         "m", "n_a", "n_b", "matched_a_count"])
        for pair in report.pairs:
            s = pair.scores
            pooled = pair.kind == "gpt_vs_any_human"
            writer.writerow([pair.paper_id, pair.kind, pair.a_feedback_id, pair.b_feedback_id,
                             f"{s.hit_rate:.6f}",
                             "" if pooled else f"{s.overlap_coefficient:.6f}",
                             "" if pooled else f"{s.jaccard:.6f}",
                             "" if pooled else f"{s.dice:.6f}",
                             "" if pooled else s.m,
                             s.n_a, s.n_b, s.matched_a_count])
    strata_path = reports_dir / "strata.csv"
    with strata_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "stratum_kind", "stratum_value", "metric",
                         "mean", "ci_low", "ci_high", "n_papers"])
        for kind in sorted(report.summary):
            for entry in report.summary[kind]["strata"]:
                for metric in sorted(entry["metrics"]):
                    cell = entry["metrics"][metric]
                    writer.writerow([kind, entry["stratum_kind"], entry["stratum_value"], metric,
                                     f"{cell['mean']:.6f}", f"{cell['ci_low']:.6f}",
                                     f"{cell['ci_high']:.6f}", entry["n_papers"]])
    recall_path = reports_dir / "recall_by_k.csv"
    with recall_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["reviewers", "hits", "total", "rate"])
        for bucket in ("1", "2", "3+"):
            cell = report.recall_by_k[bucket]
            writer.writerow([bucket, cell["hits"], cell["total"], f"{cell['rate']:.6f}"])
    quartiles_path = reports_dir / "quartiles.csv"
    with quartiles_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quarter", "hits", "total", "rate"])
        for quarter in range(4):
            writer.writerow([quarter + 1, report.quartiles.hits[quarter],
                             report.quartiles.totals[quarter],
                             f"{report.quartiles.rates[quarter]:.6f}"])
    return {"analysis_json": json_path, "pairs_csv": csv_path, "strata_csv": strata_path,
            "recall_csv": recall_path, "quartiles_csv": quartiles_path}


def run_analysis(config: RunConfig, manifest: CorpusManifest, gateway: Gateway,
                 include_human_pairs: bool = True) -> tuple[AnalysisReport, Path, int]:
    """The analyze command body: extract, match, score, aggregate, persist.

    Exit status: 0 clean, 1 when any pair was skipped, 2 when nothing could
    be scored at all."""
    seed = config.require_seed("analysis confidence intervals")
    run_dir = Path(config.out_dir) / config.effective_run_id("analyze")
    run_dir.mkdir(parents=True, exist_ok=True)
    ledger = RunLedger(run_id=run_dir.name, config=config.snapshot())

    extraction = extract_corpus_lists(manifest, gateway, config, run_dir=run_dir)
    ledger.add_keys("review_generation", extraction.review_keys)
    ledger.add_keys("extraction", extraction.extraction_keys)
    ledger.warnings.extend(extraction.warnings)

    matcher = GatewayMatcher(gateway, config.model_id, config.threshold,
                             matches_dir=run_dir / "matches")
    report = analyze_corpus(
        manifest,
        extraction.llm_lists,
        extraction.human_lists,
        matcher,
        threshold=config.threshold,
        control=config.control_policy(),
        seed=seed,
        resamples=config.resamples,
        strata_kind=config.strata_kind,
        parallelism=config.parallelism,
    )
    ledger.add_keys("matching", matcher.transcript_keys)
    ledger.warnings.extend(report.warnings)
    artifacts = write_analysis_reports(report, run_dir / "reports")
    ledger.artifacts.update({name: str(path.relative_to(run_dir)) for name, path in artifacts.items()})
    ledger.write(run_dir)

    if not report.pairs:
        return report, run_dir, 2
    if report.skips or extraction.warnings:
        return report, run_dir, 1
    return report, run_dir, 0


def _kind_summaries(report: AnalysisReport, kinds=("gpt_vs_human", "gpt_vs_any_human")) -> dict:
    return {kind: report.summary[kind] for kind in kinds if kind in report.summary}


def run_shuffle(config: RunConfig, manifest: CorpusManifest, gateway: Gateway,
                rule: str | None = None) -> tuple[dict, Path, int]:
    """The shuffle command body: plan a within-group derangement of the model
    feedback, rescore model-vs-human overlap under the shuffled pairing, and
    emit the side-by-side comparison."""
    rule = rule or config.shuffle_rule
    seed = config.require_seed("shuffle planning")
    run_dir = Path(config.out_dir) / config.effective_run_id("shuffle")
    run_dir.mkdir(parents=True, exist_ok=True)
    ledger = RunLedger(run_id=run_dir.name, config=config.snapshot())

    plan = plan_shuffle(manifest, rule, seed)
    extraction = extract_corpus_lists(manifest, gateway, config, run_dir=run_dir)
    ledger.add_keys("review_generation", extraction.review_keys)
    ledger.add_keys("extraction", extraction.extraction_keys)
    ledger.warnings.extend(extraction.warnings)

    matcher = GatewayMatcher(gateway, config.model_id, config.threshold,
                             matches_dir=run_dir / "matches")
    common = dict(threshold=config.threshold, seed=seed, resamples=config.resamples,
                  strata_kind=config.strata_kind, parallelism=config.parallelism,
                  control=ControlPolicy(enabled=False), include_human_pairs=False)
    original = analyze_corpus(manifest, extraction.llm_lists, extraction.human_lists,
                              matcher, **common)
    shuffled_lists = {
        paper_id: extraction.llm_lists[source_id]
        for paper_id, source_id in plan.pairing.items()
        if source_id in extraction.llm_lists
    }
    shuffled = analyze_corpus(manifest, shuffled_lists, extraction.human_lists,
                              matcher, **common)
    ledger.add_keys("matching", matcher.transcript_keys)

    comparison = {
        "rule": rule,
        "seed": seed,
        "excluded_papers": sorted(plan.excluded),
        "pairing": dict(sorted(plan.pairing.items())),
        "original": _kind_summaries(original),
        "shuffled": _kind_summaries(shuffled),
        "settings": original.settings,
    }
    reports_dir = run_dir / "reports"
    dump_json(reports_dir / "shuffle.json", comparison)
    csv_path = reports_dir / "shuffle.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "kind", "metric", "mean", "ci_low", "ci_high", "n"])
        for condition, rep in (("original", original), ("shuffled", shuffled)):
            for kind, block in sorted(_kind_summaries(rep).items()):
                for metric in sorted(block["overall"]):
                    cell = block["overall"][metric]
                    writer.writerow([condition, kind, metric, f"{cell['mean']:.6f}",
                                     f"{cell['ci_low']:.6f}", f"{cell['ci_high']:.6f}", cell["n"]])
    ledger.artifacts["shuffle_json"] = "reports/shuffle.json"
    ledger.artifacts["shuffle_csv"] = "reports/shuffle.csv"
    if not plan.pairing:
        ledger.warnings.append("all shuffle groups are singletons; comparison is empty")
    ledger.warnings.extend(original.warnings)
    ledger.warnings.extend(shuffled.warnings)
    ledger.write(run_dir)
    if not plan.pairing:
        return comparison, run_dir, 1
    code = 1 if (original.skips or shuffled.skips or extraction.warnings) else 0
    if not original.pairs and not shuffled.pairs:
        code = 2
    return comparison, run_dir, code


def run_review(config: RunConfig, gateway: Gateway, document: ParsedDocument,
               paper_id: str) -> tuple[dict, Path, int]:
    """The review command body: one paper in, one sectioned feedback out."""
    run_dir = Path(config.out_dir) / config.effective_run_id("review")
    run_dir.mkdir(parents=True, exist_ok=True)
    ledger = RunLedger(run_id=run_dir.name, config=config.snapshot())
    sampling = SamplingParams(temperature=config.review_temperature,
                              max_output_tokens=config.max_output_tokens)
    try:
        generated = generate_feedback(
            document, gateway, flavor=config.flavor, model_id=config.model_id,
            budget=config.budget(), sampling=sampling, paper_id=paper_id,
        )
    except ReviewScopeError as exc:
        raw = getattr(exc, "raw_text", "")
        if raw:
            feedback_dir = run_dir / "feedback"
            feedback_dir.mkdir(parents=True, exist_ok=True)
            (feedback_dir / f"{_safe_name(paper_id)}.raw.txt").write_text(raw, encoding="utf-8")
            ledger.artifacts["raw_feedback"] = f"feedback/{_safe_name(paper_id)}.raw.txt"
        ledger.warnings.append(f"feedback stage failed: {exc}")
        ledger.write(run_dir)
        raise
    payload = generated.to_json()
    path = run_dir / "feedback" / f"{_safe_name(paper_id)}.json"
    dump_json(path, payload)
    ledger.add_keys("review_generation", [generated.transcript_key])
    ledger.artifacts["feedback"] = f"feedback/{_safe_name(paper_id)}.json"
    ledger.write(run_dir)
    return payload, run_dir, 0
