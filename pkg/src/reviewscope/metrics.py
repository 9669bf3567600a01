"""Overlap metrics, the comment-count control, shuffle null planning,
recall-by-reviewer-count, positional quartile rates, and summary statistics.

All operations here are pure and deterministic given their seeds.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Collection, Iterable, Mapping, Sequence

from .corpus import CorpusManifest, StratumKey
from .extraction import CommentList
from .matching import AssignedMatching

SHUFFLE_RULES = ("nature_journal_and_category_set", "iclr_year")


@dataclass(frozen=True)
class OverlapScores:
    """Set-overlap values for one comment-list pair.

    hit_rate is the share of A comments with at least one retained match
    (m_a / n_a); the three symmetric metrics use the one-to-one assignment
    cardinality m as the intersection size:

        overlap_coefficient = m / min(n_a, n_b)
        jaccard             = m / (n_a + n_b - m)
        dice                = 2m / (n_a + n_b)
    """

    hit_rate: float
    overlap_coefficient: float
    jaccard: float
    dice: float
    m: int
    n_a: int
    n_b: int
    matched_a_count: int

    METRIC_NAMES = ("hit_rate", "overlap_coefficient", "jaccard", "dice")

    def as_dict(self) -> dict:
        return {
            "hit_rate": self.hit_rate,
            "overlap_coefficient": self.overlap_coefficient,
            "jaccard": self.jaccard,
            "dice": self.dice,
            "m": self.m,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "matched_a_count": self.matched_a_count,
        }


def overlap_scores(assignment: AssignedMatching, n_a: int, n_b: int) -> OverlapScores:
    if n_a < 1 or n_b < 1:
        raise ValueError(f"list sizes must be >= 1, got n_a={n_a}, n_b={n_b}")
    m = len(assignment.pairs)
    matched_a_count = len(assignment.matched_a)
    if m > min(n_a, n_b) or matched_a_count > n_a or len(assignment.matched_b) > n_b:
        raise ValueError("assignment inconsistent with the stated list sizes")
    return OverlapScores(
        hit_rate=matched_a_count / n_a,
        overlap_coefficient=m / min(n_a, n_b),
        jaccard=m / (n_a + n_b - m),
        dice=2 * m / (n_a + n_b),
        m=m,
        n_a=n_a,
        n_b=n_b,
        matched_a_count=matched_a_count,
    )


@dataclass(frozen=True)
class ControlPolicy:
    """Comment-count control: truncate set A to the model's comment count N
    for the same paper before human-vs-human scoring."""

    enabled: bool = True
    n_source: str = "gpt_comment_count"

    def __post_init__(self):
        if self.n_source != "gpt_comment_count":
            raise ValueError(f"unknown control n_source {self.n_source!r}")


def apply_control(list_a: CommentList, n: int) -> CommentList:
    """First min(n, len) comments of A, order preserved. n = 0 produces an
    empty list; the caller must then skip the pair and record it."""
    if n < 0:
        raise ValueError(f"control size must be >= 0, got {n}")
    kept = list_a.comments[: min(n, len(list_a.comments))]
    return CommentList(feedback_id=list_a.feedback_id, comments=tuple(kept),
                       side_label=list_a.side_label)


@dataclass(frozen=True)
class ShufflePlan:
    rule: str
    seed: int
    pairing: Mapping[str, str]
    excluded: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "rule": self.rule,
            "seed": self.seed,
            "pairing": dict(sorted(self.pairing.items())),
            "excluded": sorted(self.excluded),
        }


def seeded_derangement(members: Sequence[str], rng: random.Random) -> dict[str, str]:
    """Uniform random derangement of ``members`` by rejection sampling."""
    if len(members) < 2:
        raise ValueError("derangement needs at least 2 members")
    items = list(members)
    while True:
        shuffled = items[:]
        rng.shuffle(shuffled)
        if all(a != b for a, b in zip(items, shuffled)):
            return dict(zip(items, shuffled))


def _shuffle_group_key(paper, rule: str) -> str:
    if rule == "nature_journal_and_category_set":
        return f"{paper.venue}|{','.join(sorted(paper.root_categories))}"
    return str(paper.year)


def plan_shuffle(manifest: CorpusManifest, rule: str, seed: int) -> ShufflePlan:
    """Plan the feedback-shuffling null experiment.

    Papers are grouped by journal and exact root-category set (Nature rule)
    or by conference year (ICLR rule); each group of two or more papers gets
    a seeded uniform derangement, so no paper keeps its own feedback.
    Singleton groups cannot be deranged and are excluded."""
    if rule not in SHUFFLE_RULES:
        raise ValueError(f"unknown shuffle rule {rule!r}; known: {SHUFFLE_RULES}")
    groups: dict[str, list[str]] = {}
    for paper in manifest.papers:
        groups.setdefault(_shuffle_group_key(paper, rule), []).append(paper.paper_id)
    pairing: dict[str, str] = {}
    excluded: list[str] = []
    for key in sorted(groups):
        members = sorted(groups[key])
        if len(members) < 2:
            excluded.extend(members)
            continue
        rng = random.Random(f"{seed}|{rule}|{key}")
        pairing.update(seeded_derangement(members, rng))
    return ShufflePlan(rule=rule, seed=seed, pairing=pairing, excluded=tuple(sorted(excluded)))


CommentRef = tuple[int, int]  # (reviewer index, 1-based ordinal)

RECALL_BUCKETS = ("1", "2", "3+")


def recall_by_reviewer_count(
    comment_counts: Mapping[int, int],
    human_links: Iterable[tuple[CommentRef, CommentRef]],
    model_hits: Collection[CommentRef],
) -> dict[str, tuple[int, int]]:
    """Per-bucket (hits, total) of human comments grouped by how many distinct
    reviewers raised them.

    Retained cross-reviewer matches connect human comments into clusters
    (connected components); a comment's k is the number of distinct reviewers
    in its cluster, bucketed 1 / 2 / 3+. The counted unit is the individual
    human comment; a comment is a hit iff it has at least one retained model
    match."""
    nodes = [(rev, pos) for rev in sorted(comment_counts) for pos in range(1, comment_counts[rev] + 1)]
    node_set = set(nodes)
    parent: dict[CommentRef, CommentRef] = {n: n for n in nodes}

    def find(n: CommentRef) -> CommentRef:
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    for left, right in human_links:
        if left not in node_set or right not in node_set:
            raise ValueError(f"link references unknown comment: {left} ~ {right}")
        if left[0] == right[0]:
            raise ValueError(f"link within a single reviewer: {left} ~ {right}")
        root_l, root_r = find(left), find(right)
        if root_l != root_r:
            parent[root_l] = root_r

    clusters: dict[CommentRef, set[int]] = {}
    for node in nodes:
        clusters.setdefault(find(node), set()).add(node[0])
    hits_set = set(model_hits)
    counts = {bucket: [0, 0] for bucket in RECALL_BUCKETS}
    for node in nodes:
        k = len(clusters[find(node)])
        bucket = "3+" if k >= 3 else str(k)
        counts[bucket][1] += 1
        if node in hits_set:
            counts[bucket][0] += 1
    return {bucket: (hit, total) for bucket, (hit, total) in counts.items()}


def quarter_of(index: int, n: int) -> int:
    """Quarter (0-3) of the comment at zero-based ``index`` in an n-comment
    sequence: floor(4 * index / n)."""
    if not 0 <= index < n:
        raise ValueError(f"index {index} out of range for n={n}")
    return (4 * index) // n


@dataclass(frozen=True)
class QuartileRates:
    hits: tuple[int, int, int, int]
    totals: tuple[int, int, int, int]

    @property
    def rates(self) -> tuple[float, float, float, float]:
        return tuple(h / t if t else 0.0 for h, t in zip(self.hits, self.totals))

    def to_json(self) -> dict:
        return {"hits": list(self.hits), "totals": list(self.totals), "rates": list(self.rates)}


def positional_quartile_rates(lists: Iterable[tuple[int, Collection[int]]]) -> QuartileRates:
    """Pool comment positions over many lists.

    Each item is (list length, hit ordinals 1-based). Comment i (zero-based)
    of an n-comment list lands in quarter floor(4i/n); the rate of a quarter
    is pooled hits / pooled totals."""
    hits = [0, 0, 0, 0]
    totals = [0, 0, 0, 0]
    for n, hit_ordinals in lists:
        if n < 1:
            raise ValueError("lists must have at least one comment")
        hit_set = set(hit_ordinals)
        for i in range(n):
            q = quarter_of(i, n)
            totals[q] += 1
            if i + 1 in hit_set:
                hits[q] += 1
    return QuartileRates(hits=tuple(hits), totals=tuple(totals))


def _quantile(sorted_values: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile of pre-sorted data."""
    if not sorted_values:
        raise ValueError("no values")
    pos = q * (len(sorted_values) - 1)
    lower = math.floor(pos)
    upper = min(lower + 1, len(sorted_values) - 1)
    frac = pos - lower
    return sorted_values[lower] + frac * (sorted_values[upper] - sorted_values[lower])


def bootstrap_ci(
    values: Sequence[float],
    seed: int,
    resamples: int = 1000,
) -> tuple[float, float]:
    """95% percentile bootstrap interval for the mean.

    Draws ``resamples`` resamples with replacement using random.Random(seed)
    (one randrange per element), takes the mean of each, and returns the 2.5
    and 97.5 linear-interpolation percentiles. Deterministic given the seed.
    """
    if not values:
        raise ValueError("bootstrap_ci needs at least one value")
    rng = random.Random(seed)
    n = len(values)
    means = []
    for _ in range(resamples):
        total = 0.0
        for _ in range(n):
            total += values[rng.randrange(n)]
        means.append(total / n)
    means.sort()
    return (_quantile(means, 0.025), _quantile(means, 0.975))


def _pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise ValueError("constant series has no defined correlation")
    return sxy / math.sqrt(sxx * syy)


def pearson_r(
    xs: Sequence[float],
    ys: Sequence[float],
    seed: int = 0,
    permutations: int = 10000,
) -> tuple[float, float]:
    """Product-moment correlation with a two-sided permutation p-value.

    The p-value permutes ys ``permutations`` times with random.Random(seed)
    and applies the add-one rule, which is well behaved at small n without
    any distributional assumption."""
    if len(xs) != len(ys):
        raise ValueError("series must have equal length")
    if len(xs) < 3:
        raise ValueError("need at least 3 points")
    r_obs = _pearson(xs, ys)
    rng = random.Random(seed)
    permuted = list(ys)
    exceed = 0
    for _ in range(permutations):
        rng.shuffle(permuted)
        try:
            r_perm = _pearson(xs, permuted)
        except ValueError:
            continue
        if abs(r_perm) >= abs(r_obs) - 1e-12:
            exceed += 1
    p = (exceed + 1) / (permutations + 1)
    return (r_obs, p)


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    ci_low: float
    ci_high: float
    n: int

    def to_json(self) -> dict:
        return {"mean": self.mean, "ci_low": self.ci_low, "ci_high": self.ci_high, "n": self.n}


def summarize_values(values: Sequence[float], seed: int, resamples: int = 1000) -> MetricSummary:
    mean = math.fsum(values) / len(values)
    low, high = bootstrap_ci(values, seed=seed, resamples=resamples)
    return MetricSummary(mean=mean, ci_low=low, ci_high=high, n=len(values))


@dataclass(frozen=True)
class StratumReport:
    stratum: StratumKey
    summaries: Mapping[str, MetricSummary]
    paper_ids: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "stratum_kind": self.stratum.kind,
            "stratum_value": self.stratum.value,
            "n_papers": len(self.paper_ids),
            "metrics": {name: s.to_json() for name, s in sorted(self.summaries.items())},
        }
