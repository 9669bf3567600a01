"""Comment-aspect schema, annotation ingestion, and the model-vs-human
aspect frequency comparison.

The default schema ships only the aspects that can be named with confidence;
a full schema is supplied through configuration rather than guessed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import REVIEW_SOURCES


@dataclass(frozen=True)
class Aspect:
    aspect_id: str
    label: str
    description: str = ""


DEFAULT_ASPECTS = (
    Aspect("clarity_presentation", "Clarity and Presentation",
           "Writing quality, organization, and presentation of results"),
    Aspect("comparison_previous_studies", "Comparison to Previous Studies",
           "Positioning against, or empirical comparison with, earlier work"),
    Aspect("theoretical_soundness", "Theoretical Soundness",
           "Rigor and validity of proofs, derivations, or formal claims"),
    Aspect("novelty", "Novelty",
           "Originality of the problem, method, or findings"),
    Aspect("reproducibility", "Reproducibility",
           "Availability of code, data, and details needed to reproduce results"),
    Aspect("add_ablation_experiments", "Add ablations experiments",
           "Requests for ablation studies isolating component contributions"),
    Aspect("add_dataset_experiments", "Add experiments on more datasets",
           "Requests for evaluation on additional datasets or benchmarks"),
    Aspect("implications_research", "Implications of the Research",
           "Discussion of broader impact, applications, or future directions"),
    Aspect("ethical_aspects", "Ethical Aspects",
           "Ethics approvals, societal risks, or responsible-use concerns"),
)


@dataclass(frozen=True)
class AspectSchema:
    aspects: tuple[Aspect, ...] = DEFAULT_ASPECTS

    def __post_init__(self):
        ids = [a.aspect_id for a in self.aspects]
        if len(set(ids)) != len(ids):
            raise ValueError("aspect_ids must be unique")

    def ids(self) -> tuple[str, ...]:
        return tuple(a.aspect_id for a in self.aspects)

    @classmethod
    def from_file(cls, path) -> "AspectSchema":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        aspects = tuple(
            Aspect(
                aspect_id=str(item["aspect_id"]),
                label=str(item["label"]),
                description=str(item.get("description", "")),
            )
            for item in obj["aspects"]
        )
        return cls(aspects=aspects)


@dataclass(frozen=True)
class AspectAnnotation:
    feedback_id: str
    ordinal: int
    source: str
    aspect_ids: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.source not in REVIEW_SOURCES:
            raise ValueError(f"source {self.source!r} not one of {REVIEW_SOURCES}")
        if self.ordinal < 1:
            raise ValueError("ordinal must be >= 1")


def load_annotations(path, schema: AspectSchema) -> list[AspectAnnotation]:
    """Read line-delimited JSON aspect annotations, validating ids against
    the schema."""
    known = set(schema.ids())
    out: list[AspectAnnotation] = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed annotation line: {exc}") from exc
            aspect_ids = frozenset(str(a) for a in obj.get("aspect_ids", []))
            unknown = aspect_ids - known
            if unknown:
                raise ValueError(f"{path}:{lineno}: aspect ids not in schema: {sorted(unknown)}")
            out.append(AspectAnnotation(
                feedback_id=str(obj["feedback_id"]),
                ordinal=int(obj["ordinal"]),
                source=str(obj["source"]),
                aspect_ids=aspect_ids,
            ))
    return out


def aspect_frequencies(
    annotations: Iterable[AspectAnnotation],
    source: str,
    schema: AspectSchema,
) -> dict[str, float]:
    """Relative frequency of each aspect among comments of one source.

    Each annotation covers one comment; a comment carrying several aspects
    counts once toward each. Frequencies are over the total comment count of
    that source, so they need not sum to one."""
    relevant = [a for a in annotations if a.source == source]
    if not relevant:
        raise ValueError(f"no annotations with source {source!r}")
    totals = {aspect_id: 0 for aspect_id in schema.ids()}
    for ann in relevant:
        for aspect_id in ann.aspect_ids:
            totals[aspect_id] += 1
    return {aspect_id: count / len(relevant) for aspect_id, count in totals.items()}


def frequency_ratio(
    llm_freqs: Mapping[str, float],
    human_freqs: Mapping[str, float],
    smoothing: float = 0.0,
) -> dict[str, float | None]:
    """Per-aspect (llm + s) / (human + s) with additive smoothing s.

    With s = 0 a zero denominator has no defined ratio and is reported as
    None, the undefined marker."""
    if set(llm_freqs) != set(human_freqs):
        raise ValueError("llm and human frequencies must cover the same aspects")
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    out: dict[str, float | None] = {}
    for aspect_id in llm_freqs:
        numerator = llm_freqs[aspect_id] + smoothing
        denominator = human_freqs[aspect_id] + smoothing
        out[aspect_id] = None if denominator == 0 else numerator / denominator
    return out
