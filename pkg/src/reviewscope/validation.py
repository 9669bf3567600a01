"""Human-verification arithmetic: precision/recall/F1 from confusion counts,
matching evaluation against consensus annotations, pairwise inter-annotator
agreement, and per-annotator F1 against the majority vote."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Collection, Iterable, Mapping

from .matching import MatchSet

LABELS = ("matched", "not_matched")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int | None = None

    def __post_init__(self):
        for name in ("tp", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.tn is not None and self.tn < 0:
            raise ValueError("tn must be >= 0")


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def prf(counts: ConfusionCounts) -> PRF:
    """Precision, recall, and F1. A zero denominator yields 0.0 for that
    value with the degenerate flag set, so batch reports never abort."""
    degenerate = False
    if counts.tp + counts.fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = counts.tp / (counts.tp + counts.fn)
    if precision + recall == 0:
        f1, degenerate = 0.0, True
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return PRF(precision=precision, recall=recall, f1=f1, degenerate=degenerate)


@dataclass(frozen=True)
class MatchAnnotation:
    pair_id: str
    annotator_id: str
    label: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label {self.label!r} not one of {LABELS}")


def evaluate_matching(
    predicted: MatchSet,
    consensus: Mapping[str, str],
    universe: Collection[str],
) -> ConfusionCounts:
    """Confusion counts of a predicted MatchSet against consensus labels over
    the full candidate pair universe (the cross product of the two comment
    lists, keyed "A<i>-B<j>"). tn is the remainder of the universe, so the
    four counts always sum to its size."""
    universe_set = set(universe)
    for pair_id, label in consensus.items():
        if pair_id not in universe_set:
            raise ValueError(f"annotation references unknown pair_id {pair_id!r}")
        if label not in LABELS:
            raise ValueError(f"consensus label {label!r} not one of {LABELS}")
    predicted_pairs = {f"{m.a_id}-{m.b_id}" for m in predicted.matches}
    stray = predicted_pairs - universe_set
    if stray:
        raise ValueError(f"predicted pairs outside the candidate universe: {sorted(stray)}")
    tp = fp = fn = tn = 0
    for pair_id in universe_set:
        is_predicted = pair_id in predicted_pairs
        is_matched = consensus.get(pair_id) == "matched"
        if is_predicted and is_matched:
            tp += 1
        elif is_predicted:
            fp += 1
        elif is_matched:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def _by_annotator(annotations: Iterable[MatchAnnotation]) -> dict[str, dict[str, str]]:
    table: dict[str, dict[str, str]] = {}
    for ann in annotations:
        labels = table.setdefault(ann.annotator_id, {})
        if ann.pair_id in labels:
            raise ValueError(
                f"annotator {ann.annotator_id!r} labels pair {ann.pair_id!r} more than once"
            )
        labels[ann.pair_id] = ann.label
    return table


def pairwise_agreement(annotations: Iterable[MatchAnnotation]) -> float:
    """Fraction of per-item annotator-pair comparisons with equal labels."""
    table = _by_annotator(annotations)
    if len(table) < 2:
        raise ValueError("need at least 2 annotators")
    agree = total = 0
    for first, second in combinations(sorted(table), 2):
        shared = table[first].keys() & table[second].keys()
        for pair_id in shared:
            total += 1
            if table[first][pair_id] == table[second][pair_id]:
                agree += 1
    if total == 0:
        raise ValueError("annotators share no pairs")
    return agree / total


def majority_f1(annotations: Iterable[MatchAnnotation]) -> dict[str, PRF]:
    """Majority label per pair, then each annotator's PRF against the
    majority, with "matched" as the positive class. Requires an odd number
    of annotators, each labelling every pair."""
    table = _by_annotator(annotations)
    if len(table) % 2 == 0 or len(table) < 3:
        raise ValueError(f"need an odd number (>= 3) of annotators, got {len(table)}")
    annotators = sorted(table)
    pair_ids = set(table[annotators[0]])
    for annotator in annotators[1:]:
        if set(table[annotator]) != pair_ids:
            raise ValueError("every annotator must label every pair for a majority vote")
    majority: dict[str, str] = {}
    for pair_id in pair_ids:
        votes = sum(1 for annotator in annotators if table[annotator][pair_id] == "matched")
        majority[pair_id] = "matched" if votes * 2 > len(annotators) else "not_matched"
    out: dict[str, PRF] = {}
    for annotator in annotators:
        tp = fp = fn = 0
        for pair_id in pair_ids:
            said = table[annotator][pair_id] == "matched"
            truth = majority[pair_id] == "matched"
            if said and truth:
                tp += 1
            elif said:
                fp += 1
            elif truth:
                fn += 1
        out[annotator] = prf(ConfusionCounts(tp=tp, fp=fp, fn=fn))
    return out
