"""Paper/review data model, line-delimited JSON corpus files, validation,
and stratification.

Corpus files are UTF-8 JSON lines with a ``kind`` discriminator per line:
``{"kind": "paper", ...}`` or ``{"kind": "review", ...}``. Records are
immutable values and safe to share across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CorpusError

DECISIONS = ("oral", "spotlight", "poster", "rejected", "withdrawn", "accepted", "unknown")
REVIEW_SOURCES = ("human", "llm")
STRATUM_KINDS = ("by_venue", "by_decision", "by_category_set", "by_year")

# Top-level subject tags used by the default validator. Conference corpora
# typically carry empty category sets, which always pass.
DEFAULT_CATEGORY_VOCABULARY = frozenset({
    "physical sciences",
    "earth and environmental sciences",
    "biological sciences",
    "health sciences",
    "scientific community and society",
})


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    venue: str
    year: int
    title: str
    abstract: str = ""
    captions: tuple[str, ...] = ()
    body_text: str = ""
    root_categories: frozenset[str] = frozenset()
    decision: str = "unknown"

    def to_json(self) -> dict:
        return {
            "kind": "paper",
            "paper_id": self.paper_id,
            "venue": self.venue,
            "year": self.year,
            "title": self.title,
            "abstract": self.abstract,
            "captions": list(self.captions),
            "body_text": self.body_text,
            "root_categories": sorted(self.root_categories),
            "decision": self.decision,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "PaperRecord":
        return cls(
            paper_id=str(obj["paper_id"]),
            venue=str(obj["venue"]),
            year=int(obj["year"]),
            title=str(obj["title"]),
            abstract=str(obj.get("abstract", "")),
            captions=tuple(str(c) for c in obj.get("captions", [])),
            body_text=str(obj.get("body_text", "")),
            root_categories=frozenset(str(c) for c in obj.get("root_categories", [])),
            decision=str(obj.get("decision", "unknown")),
        )


@dataclass(frozen=True)
class ReviewRecord:
    paper_id: str
    reviewer_id: str
    source: str
    raw_text: str
    position: int

    def to_json(self) -> dict:
        return {
            "kind": "review",
            "paper_id": self.paper_id,
            "reviewer_id": self.reviewer_id,
            "source": self.source,
            "position": self.position,
            "raw_text": self.raw_text,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ReviewRecord":
        return cls(
            paper_id=str(obj["paper_id"]),
            reviewer_id=str(obj["reviewer_id"]),
            source=str(obj.get("source", "human")),
            raw_text=str(obj["raw_text"]),
            position=int(obj["position"]),
        )


@dataclass(frozen=True)
class CorpusManifest:
    papers: tuple[PaperRecord, ...] = ()
    reviews: tuple[ReviewRecord, ...] = ()
    provenance: Mapping = field(default_factory=dict)

    def paper_by_id(self) -> dict[str, PaperRecord]:
        return {p.paper_id: p for p in self.papers}

    def reviews_for(self, paper_id: str) -> list[ReviewRecord]:
        found = [r for r in self.reviews if r.paper_id == paper_id]
        found.sort(key=lambda r: r.position)
        return found


@dataclass(frozen=True)
class StratumKey:
    kind: str
    value: str

    def __post_init__(self):
        if self.kind not in STRATUM_KINDS:
            raise ValueError(f"unknown stratum kind {self.kind!r}")


@dataclass(frozen=True)
class Violation:
    severity: str  # "error" | "warning"
    record: str
    rule: str
    message: str

    def __str__(self):
        return f"[{self.severity}] {self.record}: {self.rule}: {self.message}"


def load_corpus(path) -> CorpusManifest:
    """Read a line-delimited JSON corpus file.

    Raises CorpusError on a missing file, a malformed line (reported with its
    line number), a duplicated paper_id (both line numbers named), or any
    error-severity validation violation. Record order is preserved.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    papers: list[PaperRecord] = []
    reviews: list[ReviewRecord] = []
    paper_lines: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON line: {exc}") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: record is not a JSON object")
            kind = obj.get("kind")
            try:
                if kind == "paper":
                    rec = PaperRecord.from_json(obj)
                    if rec.paper_id in paper_lines:
                        raise CorpusError(
                            f"{path}:{lineno}: duplicate paper_id {rec.paper_id!r} "
                            f"(first seen on line {paper_lines[rec.paper_id]})"
                        )
                    paper_lines[rec.paper_id] = lineno
                    papers.append(rec)
                elif kind == "review":
                    reviews.append(ReviewRecord.from_json(obj))
                else:
                    raise CorpusError(f"{path}:{lineno}: unknown record kind {kind!r}")
            except (KeyError, ValueError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad record: {exc}") from exc
    manifest = CorpusManifest(papers=tuple(papers), reviews=tuple(reviews))
    errors = [v for v in validate_corpus(manifest) if v.severity == "error"]
    if errors:
        summary = "; ".join(str(v) for v in errors[:5])
        raise CorpusError(f"{path}: corpus fails validation: {summary}")
    return manifest


def write_corpus(manifest: CorpusManifest, path) -> None:
    """Write papers then reviews as JSON lines. Inverse of load_corpus."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for paper in manifest.papers:
            fh.write(json.dumps(paper.to_json(), ensure_ascii=False) + "\n")
        for review in manifest.reviews:
            fh.write(json.dumps(review.to_json(), ensure_ascii=False) + "\n")


def validate_corpus(
    manifest: CorpusManifest,
    category_vocabulary: Iterable[str] | None = None,
) -> list[Violation]:
    """Check every record invariant; violations are data, not exceptions.

    Returns an empty list iff all invariants hold. A paper without reviews is
    reported as a warning (analyses skip it), everything else as an error.
    """
    vocab = frozenset(category_vocabulary) if category_vocabulary is not None else DEFAULT_CATEGORY_VOCABULARY
    out: list[Violation] = []
    seen_papers: dict[str, PaperRecord] = {}
    for paper in manifest.papers:
        ref = f"paper {paper.paper_id}"
        if paper.paper_id in seen_papers:
            out.append(Violation("error", ref, "unique-paper-id", "paper_id occurs more than once"))
        seen_papers[paper.paper_id] = paper
        if paper.decision not in DECISIONS:
            out.append(Violation("error", ref, "decision-enum",
                                 f"decision {paper.decision!r} not one of {DECISIONS}"))
        unknown = paper.root_categories - vocab
        if unknown:
            out.append(Violation("error", ref, "category-vocabulary",
                                 f"categories not in vocabulary: {sorted(unknown)}"))

    seen_pairs: set[tuple[str, str]] = set()
    positions: dict[str, list[int]] = {}
    for review in manifest.reviews:
        ref = f"review ({review.paper_id}, {review.reviewer_id})"
        if review.paper_id not in seen_papers:
            out.append(Violation("error", ref, "review-paper-resolves",
                                 f"paper_id {review.paper_id!r} not in corpus"))
        pair = (review.paper_id, review.reviewer_id)
        if pair in seen_pairs:
            out.append(Violation("error", ref, "unique-reviewer", "duplicate (paper_id, reviewer_id)"))
        seen_pairs.add(pair)
        if review.source not in REVIEW_SOURCES:
            out.append(Violation("error", ref, "source-enum",
                                 f"source {review.source!r} not one of {REVIEW_SOURCES}"))
        if not review.raw_text.strip():
            out.append(Violation("error", ref, "nonempty-text", "raw_text is empty"))
        if review.position < 1:
            out.append(Violation("error", ref, "position-range", "position must be >= 1"))
        positions.setdefault(review.paper_id, []).append(review.position)

    for paper_id, pos in positions.items():
        expected = list(range(1, len(pos) + 1))
        if sorted(pos) != expected:
            out.append(Violation("error", f"paper {paper_id}", "position-gap",
                                 f"review positions {sorted(pos)} do not form 1..{len(pos)}"))
    for paper_id in seen_papers:
        if paper_id not in positions:
            out.append(Violation("warning", f"paper {paper_id}", "no-reviews",
                                 "paper has no reviews; analyses will skip it"))
    return out


def _category_set_value(paper: PaperRecord) -> str:
    return ",".join(sorted(paper.root_categories))


def stratify(manifest: CorpusManifest, key_kind: str) -> dict[StratumKey, list[str]]:
    """Partition paper ids by the requested key. Groups are sorted by value;
    their union is exactly the paper set."""
    if key_kind not in STRATUM_KINDS:
        raise ValueError(f"unknown stratum kind {key_kind!r}")
    groups: dict[str, list[str]] = {}
    for paper in manifest.papers:
        if key_kind == "by_venue":
            value = paper.venue
        elif key_kind == "by_decision":
            value = paper.decision
        elif key_kind == "by_year":
            value = str(paper.year)
        else:
            value = _category_set_value(paper)
        groups.setdefault(value, []).append(paper.paper_id)
    return {StratumKey(key_kind, value): groups[value] for value in sorted(groups)}
