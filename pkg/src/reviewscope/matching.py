"""Stage 2 of the retrospective pipeline: model-judged semantic matching
between two comment lists, similarity rating on a 5-10 scale, threshold
filtering, and a deterministic one-to-one assignment for the set metrics."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ParseFailure
from .extraction import CommentList
from .gateway import CompletionRequest, Gateway, SamplingParams
from .jsonutil import first_json_object

MATCHING_TEMPLATE = """\
Your task is to carefully analyze and accurately match the key concerns raised in two reviews, ensuring a strong correspondence between the matched points. Examine the verbatim closely.
====Review A:
<Review_A_json>
=====Review B:
<Review_B_json>
Please follow the example JSON format below for matching points. For instance, if point 1 from review A is nearly identical to point 2 from review B, it should look like this:
{
"A1-B2": {"rationale": "<explain why A1 and B2 are nearly identical>", "similarity": "<5-10, only an integer>"},
}
Note that you should only match points with a significant degree of similarity in their concerns. Refrain from matching points with only superficial similarities or weak connections. For each matched pair, rate the similarity on a scale of 5-10.
5. Somewhat Related: Points address similar themes but from different angles.
6. Moderately Related: Points share a common theme but with different perspectives or suggestions.
7. Strongly Related: Points are largely aligned but differ in some details or nuances.
8. Very Strongly Related: Points offer similar suggestions or concerns, with slight differences.
9. Almost Identical: Points are nearly the same, with minor differences in wording or presentation.
10. Identical: Points are exactly the same in terms of concerns, suggestions, or praises.
If no match is found, output an empty JSON object. Provide your output as JSON only.
"""

MATCH_REPAIR_TEMPLATE = """\
Your previous response could not be parsed: <Problem>
Previous response:
<Malformed_output>
Restate your answer strictly as a JSON object whose keys pair point IDs like "A1-B2" and whose values are objects {"rationale": "<text>", "similarity": "<5-10, only an integer>"}, with no code fences and no other text. If there are no matches, output {}.
"""

MATCHING_SAMPLING = SamplingParams(temperature=0.0, max_output_tokens=2048)

SIMILARITY_MIN = 5
SIMILARITY_MAX = 10
DEFAULT_THRESHOLD = 7

_PAIR_KEY = re.compile(r"^\s*([A-Za-z]+\d+)\s*-\s*([A-Za-z]+\d+)\s*$")
_INT_STR = re.compile(r"^[+-]?\d+$")


@dataclass(frozen=True)
class RawMatch:
    a_id: str
    b_id: str
    similarity: int
    rationale: str = ""

    def __post_init__(self):
        if not (SIMILARITY_MIN <= self.similarity <= SIMILARITY_MAX):
            raise ValueError(f"similarity {self.similarity} outside [{SIMILARITY_MIN}, {SIMILARITY_MAX}]")


@dataclass(frozen=True)
class MatchSet:
    list_a_id: str
    list_b_id: str
    matches: tuple[RawMatch, ...] = ()
    threshold_applied: int | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        pairs = [(m.a_id, m.b_id) for m in self.matches]
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate (a_id, b_id) pairs in MatchSet")
        if self.threshold_applied is not None:
            low = [m for m in self.matches if m.similarity < self.threshold_applied]
            if low:
                raise ValueError("matches below the applied threshold present")


@dataclass(frozen=True)
class AssignedMatching:
    pairs: tuple[tuple[str, str], ...] = ()
    matched_a: frozenset[str] = frozenset()
    matched_b: frozenset[str] = frozenset()


def build_matching_prompt(list_a: CommentList, list_b: CommentList) -> str:
    """Render the matching instruction with both comment lists embedded as
    ordinal-keyed JSON objects."""
    if len(list_a) == 0 or len(list_b) == 0:
        raise ValueError("both comment lists must be non-empty")
    a_json = json.dumps(list_a.id_text_map(), ensure_ascii=False)
    b_json = json.dumps(list_b.id_text_map(), ensure_ascii=False)
    return MATCHING_TEMPLATE.replace("<Review_A_json>", a_json).replace("<Review_B_json>", b_json)


def _coerce_similarity(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return int(value) if value.is_integer() else None
    if isinstance(value, str) and _INT_STR.match(value.strip()):
        return int(value.strip())
    return None


def parse_match_json(raw: str, list_a: CommentList, list_b: CommentList) -> MatchSet:
    """Parse the matcher response into a MatchSet.

    Entries with malformed keys, unknown ids, non-integer similarity, or
    similarity outside [5, 10] are dropped and reported as warnings, never
    raised. Duplicate pairs keep the higher similarity. An empty object is a
    valid empty MatchSet; only a response with no JSON object at all raises.
    """
    obj = first_json_object(raw)
    a_ids = {c.local_id for c in list_a.comments}
    b_ids = {c.local_id for c in list_b.comments}
    best: dict[tuple[str, str], RawMatch] = {}
    order: list[tuple[str, str]] = []
    warnings: list[str] = []
    for key, value in obj.items():
        parsed = _PAIR_KEY.match(key)
        if not parsed:
            warnings.append(f"dropped entry {key!r}: key is not of the form A<i>-B<j>")
            continue
        a_id, b_id = parsed.group(1), parsed.group(2)
        if a_id not in a_ids or b_id not in b_ids:
            warnings.append(f"dropped entry {key!r}: unknown comment id")
            continue
        if not isinstance(value, dict):
            warnings.append(f"dropped entry {key!r}: value is not an object")
            continue
        similarity = _coerce_similarity(value.get("similarity"))
        if similarity is None:
            warnings.append(f"dropped entry {key!r}: similarity is not an integer")
            continue
        if not (SIMILARITY_MIN <= similarity <= SIMILARITY_MAX):
            warnings.append(
                f"dropped entry {key!r}: similarity {similarity} outside "
                f"[{SIMILARITY_MIN}, {SIMILARITY_MAX}]"
            )
            continue
        match = RawMatch(a_id=a_id, b_id=b_id, similarity=similarity,
                         rationale=str(value.get("rationale", "")))
        pair = (a_id, b_id)
        if pair not in best:
            order.append(pair)
            best[pair] = match
        elif match.similarity > best[pair].similarity:
            best[pair] = match
    return MatchSet(
        list_a_id=list_a.feedback_id,
        list_b_id=list_b.feedback_id,
        matches=tuple(best[pair] for pair in order),
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class MatchResult:
    match_set: MatchSet
    transcript_keys: tuple[str, ...] = ()


def match_comments(
    list_a: CommentList,
    list_b: CommentList,
    gateway: Gateway,
    model_id: str,
) -> MatchResult:
    """One matching call plus one repair retry. An empty input list
    short-circuits to an empty MatchSet with zero gateway calls."""
    la = list_a.with_side_label("A")
    lb = list_b.with_side_label("B")
    if len(la) == 0 or len(lb) == 0:
        empty = MatchSet(list_a_id=list_a.feedback_id, list_b_id=list_b.feedback_id)
        return MatchResult(match_set=empty, transcript_keys=())
    request = CompletionRequest(
        model_id=model_id,
        prompt_text=build_matching_prompt(la, lb),
        sampling=MATCHING_SAMPLING,
        purpose_tag="matching",
    )
    response = gateway.complete(request)
    keys = [response.transcript_key]
    try:
        match_set = parse_match_json(response.text, la, lb)
    except ParseFailure as first_error:
        repair_prompt = MATCH_REPAIR_TEMPLATE.replace("<Problem>", str(first_error)).replace(
            "<Malformed_output>", response.text
        )
        repair = CompletionRequest(
            model_id=model_id,
            prompt_text=repair_prompt,
            sampling=MATCHING_SAMPLING,
            purpose_tag="matching",
        )
        retry = gateway.complete(repair)
        keys.append(retry.transcript_key)
        try:
            match_set = parse_match_json(retry.text, la, lb)
        except ParseFailure as exc:
            raise ParseFailure(
                f"matching failed after repair retry: {exc}", raw_text=retry.text
            ) from first_error
    return MatchResult(match_set=match_set, transcript_keys=tuple(keys))


def filter_threshold(ms: MatchSet, threshold: int = DEFAULT_THRESHOLD) -> MatchSet:
    """Retain matches rated at or above the threshold (default 7)."""
    if not (SIMILARITY_MIN <= threshold <= SIMILARITY_MAX):
        raise ValueError(
            f"threshold must be within [{SIMILARITY_MIN}, {SIMILARITY_MAX}], got {threshold}"
        )
    retained = tuple(m for m in ms.matches if m.similarity >= threshold)
    return replace(ms, matches=retained, threshold_applied=threshold)


def _id_key(local_id: str):
    match = re.match(r"([A-Za-z]*)(\d+)$", local_id)
    if match:
        return (match.group(1), int(match.group(2)))
    return (local_id, -1)


def _pair_key(pair: tuple[str, str]):
    return (_id_key(pair[0]), _id_key(pair[1]))


# Cardinality dominates similarity in the assignment objective; similarities
# sum to at most 10 * 64 for the supported list sizes.
_CARDINALITY_WEIGHT = 1000


def _best_value(pairs: list[RawMatch]) -> tuple[int, int]:
    """(max cardinality, max total similarity at that cardinality) of a
    one-to-one subset of ``pairs``, via a weighted assignment solve."""
    if not pairs:
        return (0, 0)
    a_ids = sorted({m.a_id for m in pairs}, key=_id_key)
    b_ids = sorted({m.b_id for m in pairs}, key=_id_key)
    a_index = {a: i for i, a in enumerate(a_ids)}
    b_index = {b: i for i, b in enumerate(b_ids)}
    weight = np.zeros((len(a_ids), len(b_ids)))
    for m in pairs:
        weight[a_index[m.a_id], b_index[m.b_id]] = _CARDINALITY_WEIGHT + m.similarity
    rows, cols = linear_sum_assignment(weight, maximize=True)
    cardinality = 0
    total = 0
    for r, c in zip(rows, cols):
        if weight[r, c] > 0:
            cardinality += 1
            total += int(weight[r, c]) - _CARDINALITY_WEIGHT
    return (cardinality, total)


def assign_one_to_one(ms: MatchSet) -> AssignedMatching:
    """Maximum-cardinality one-to-one assignment over the retained matches;
    among those, maximal total similarity; remaining ties resolved by taking
    pairs in (a_id, b_id) order. matched_a / matched_b come from all retained
    raw matches, not only the assigned pairs."""
    if ms.threshold_applied is None:
        raise ValueError("assign_one_to_one requires a threshold-filtered MatchSet")
    matched_a = frozenset(m.a_id for m in ms.matches)
    matched_b = frozenset(m.b_id for m in ms.matches)
    candidates = sorted(ms.matches, key=lambda m: _pair_key((m.a_id, m.b_id)))
    target = _best_value(list(candidates))
    forced: list[tuple[str, str]] = []
    forced_total = 0
    used_a: set[str] = set()
    used_b: set[str] = set()
    for match in candidates:
        if len(forced) == target[0]:
            break
        if match.a_id in used_a or match.b_id in used_b:
            continue
        rest = [
            m for m in candidates
            if m is not match
            and m.a_id not in used_a | {match.a_id}
            and m.b_id not in used_b | {match.b_id}
        ]
        sub = _best_value(rest)
        candidate_value = (len(forced) + 1 + sub[0], forced_total + match.similarity + sub[1])
        if candidate_value == target:
            forced.append((match.a_id, match.b_id))
            forced_total += match.similarity
            used_a.add(match.a_id)
            used_b.add(match.b_id)
    return AssignedMatching(pairs=tuple(forced), matched_a=matched_a, matched_b=matched_b)


def match_set_to_json(ms: MatchSet, assignment: AssignedMatching | None = None) -> dict:
    payload = {
        "list_a_id": ms.list_a_id,
        "list_b_id": ms.list_b_id,
        "threshold": ms.threshold_applied,
        "matches": [
            {"a_id": m.a_id, "b_id": m.b_id, "similarity": m.similarity, "rationale": m.rationale}
            for m in ms.matches
        ],
        "warnings": list(ms.warnings),
    }
    if assignment is not None:
        payload["assignment"] = [{"a_id": a, "b_id": b} for a, b in assignment.pairs]
    return payload
