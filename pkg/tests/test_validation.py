import itertools

import pytest

from reviewscope.matching import MatchSet, RawMatch
from reviewscope.validation import (
    ConfusionCounts,
    MatchAnnotation,
    evaluate_matching,
    majority_f1,
    pairwise_agreement,
    prf,
)


def test_prf_reproduces_extraction_verification_table():
    result = prf(ConfusionCounts(tp=2634, fn=110, fp=63))
    assert result.precision == pytest.approx(0.977, abs=1e-3)
    assert result.recall == pytest.approx(0.960, abs=1e-3)
    assert result.f1 == pytest.approx(0.968, abs=1e-3)
    assert not result.degenerate


def test_prf_reproduces_matching_verification_table():
    result = prf(ConfusionCounts(tp=685, fn=95, fp=197, tn=11058))
    assert result.precision == pytest.approx(0.777, abs=1e-3)
    assert result.recall == pytest.approx(0.878, abs=1e-3)
    assert result.f1 == pytest.approx(0.824, abs=1e-3)


def test_prf_perfect():
    assert prf(ConfusionCounts(tp=10, fp=0, fn=0)) == prf(ConfusionCounts(tp=10, fp=0, fn=0))
    result = prf(ConfusionCounts(tp=10, fp=0, fn=0))
    assert (result.precision, result.recall, result.f1) == (1.0, 1.0, 1.0)


def test_prf_scale_invariance():
    base = prf(ConfusionCounts(tp=6, fp=3, fn=2))
    for k in (2, 5, 17):
        scaled = prf(ConfusionCounts(tp=6 * k, fp=3 * k, fn=2 * k))
        assert scaled.precision == pytest.approx(base.precision)
        assert scaled.recall == pytest.approx(base.recall)
        assert scaled.f1 == pytest.approx(base.f1)


def test_prf_f1_between_precision_and_recall():
    for tp, fp, fn in [(5, 1, 3), (2, 9, 1), (7, 7, 7), (1, 0, 4)]:
        result = prf(ConfusionCounts(tp=tp, fp=fp, fn=fn))
        low, high = sorted((result.precision, result.recall))
        assert low - 1e-12 <= result.f1 <= high + 1e-12
    balanced = prf(ConfusionCounts(tp=4, fp=2, fn=2))
    assert balanced.f1 == pytest.approx(balanced.precision) == pytest.approx(balanced.recall)


def test_prf_degenerate_zero_with_flag():
    result = prf(ConfusionCounts(tp=0, fp=0, fn=0))
    assert (result.precision, result.recall, result.f1) == (0.0, 0.0, 0.0)
    assert result.degenerate
    with pytest.raises(ValueError):
        ConfusionCounts(tp=-1, fp=0, fn=0)


def _predicted(pairs):
    matches = tuple(RawMatch(a_id=a, b_id=b, similarity=8, rationale="") for a, b in pairs)
    return MatchSet(list_a_id="fa", list_b_id="fb", matches=matches)


def _universe(n_a, n_b):
    return [f"A{i}-B{j}" for i in range(1, n_a + 1) for j in range(1, n_b + 1)]


def test_evaluate_matching_identity():
    universe = _universe(2, 2)
    consensus = {pid: ("matched" if pid in ("A1-B1", "A2-B2") else "not_matched")
                 for pid in universe}
    counts = evaluate_matching(_predicted([("A1", "B1"), ("A2", "B2")]), consensus, universe)
    assert (counts.tp, counts.fp, counts.fn, counts.tn) == (2, 0, 0, 2)


def test_evaluate_matching_all_missed():
    universe = _universe(3, 1)
    consensus = {pid: "matched" for pid in universe}
    counts = evaluate_matching(_predicted([]), consensus, universe)
    assert (counts.tp, counts.fp, counts.fn, counts.tn) == (0, 0, 3, 0)


def test_evaluate_matching_hand_enumerated_fixture():
    # 12 candidate pairs; predictions disagree with consensus on exactly two
    universe = _universe(3, 4)
    annotated = {"A1-B1", "A2-B2", "A3-B4"}
    predicted_pairs = {("A1", "B1"), ("A2", "B2"), ("A3", "B3")}  # one fn, one fp
    consensus = {pid: ("matched" if pid in annotated else "not_matched") for pid in universe}
    counts = evaluate_matching(_predicted(sorted(predicted_pairs)), consensus, universe)
    assert (counts.tp, counts.fp, counts.fn) == (2, 1, 1)
    assert counts.tp + counts.fp + counts.fn + counts.tn == len(universe)


def test_evaluate_matching_unknown_pair_rejected():
    universe = _universe(1, 1)
    with pytest.raises(ValueError, match="unknown pair_id"):
        evaluate_matching(_predicted([]), {"A9-B9": "matched"}, universe)
    with pytest.raises(ValueError, match="outside the candidate universe"):
        evaluate_matching(_predicted([("A5", "B5")]), {"A1-B1": "matched"}, universe)


def ann(pair, annotator, label):
    return MatchAnnotation(pair_id=pair, annotator_id=annotator, label=label)


def test_pairwise_agreement_identity_and_inverse():
    pairs = [f"q{i}" for i in range(6)]
    same = [ann(p, a, "matched") for p in pairs for a in ("x", "y")]
    assert pairwise_agreement(same) == 1.0
    opposed = [ann(p, "x", "matched") for p in pairs] + [ann(p, "y", "not_matched") for p in pairs]
    assert pairwise_agreement(opposed) == 0.0


def test_pairwise_agreement_three_annotators_hand_count():
    labels = {
        "x": {"q1": "matched", "q2": "matched", "q3": "not_matched"},
        "y": {"q1": "matched", "q2": "not_matched", "q3": "not_matched"},
        "z": {"q1": "not_matched", "q2": "matched", "q3": "not_matched"},
    }
    annotations = [ann(p, a, label) for a, row in labels.items() for p, label in row.items()]
    expected_agreements = 0
    comparisons = 0
    for first, second in itertools.combinations(sorted(labels), 2):
        for pair_id in ("q1", "q2", "q3"):
            comparisons += 1
            expected_agreements += labels[first][pair_id] == labels[second][pair_id]
    assert comparisons == 9
    assert pairwise_agreement(annotations) == pytest.approx(expected_agreements / comparisons)


def test_pairwise_agreement_requires_shared_pairs():
    disjoint = [ann("q1", "x", "matched"), ann("q2", "y", "matched")]
    with pytest.raises(ValueError, match="share no pairs"):
        pairwise_agreement(disjoint)
    with pytest.raises(ValueError, match="at least 2"):
        pairwise_agreement([ann("q1", "x", "matched")])


def test_majority_f1_identical_annotators():
    pairs = [f"q{i}" for i in range(5)]
    annotations = [ann(p, a, "matched" if i % 2 else "not_matched")
                   for i, p in enumerate(pairs) for a in ("x", "y", "z")]
    result = majority_f1(annotations)
    assert set(result) == {"x", "y", "z"}
    assert all(r.f1 == 1.0 for r in result.values())


def test_majority_f1_inverter_scores_zero():
    pairs = [f"q{i}" for i in range(6)]
    annotations = []
    for i, p in enumerate(pairs):
        truth = "matched" if i < 3 else "not_matched"
        flipped = "not_matched" if truth == "matched" else "matched"
        annotations += [ann(p, "x", truth), ann(p, "y", truth), ann(p, "z", flipped)]
    result = majority_f1(annotations)
    assert result["x"].f1 == 1.0
    assert result["z"].f1 == 0.0
    assert result["z"].degenerate


def test_majority_f1_ten_pair_fixture_matches_brute_force():
    import random

    rng = random.Random(13)
    pairs = [f"q{i}" for i in range(10)]
    table = {a: {p: rng.choice(["matched", "not_matched"]) for p in pairs}
             for a in ("x", "y", "z")}
    annotations = [ann(p, a, table[a][p]) for a in table for p in pairs]
    result = majority_f1(annotations)
    for annotator in table:
        tp = fp = fn = 0
        for p in pairs:
            votes = [table[a][p] for a in ("x", "y", "z")]
            majority = "matched" if votes.count("matched") >= 2 else "not_matched"
            said = table[annotator][p] == "matched"
            truth = majority == "matched"
            tp += said and truth
            fp += said and not truth
            fn += (not said) and truth
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        assert result[annotator].f1 == pytest.approx(f1)


def test_majority_f1_rejects_even_or_incomplete():
    annotations = [ann("q1", "x", "matched"), ann("q1", "y", "matched")]
    with pytest.raises(ValueError, match="odd number"):
        majority_f1(annotations)
    incomplete = [ann("q1", "x", "matched"), ann("q1", "y", "matched"),
                  ann("q2", "z", "matched")]
    with pytest.raises(ValueError, match="every pair"):
        majority_f1(incomplete)
    with pytest.raises(ValueError, match="more than once"):
        pairwise_agreement([ann("q1", "x", "matched"), ann("q1", "x", "matched")])


def test_match_annotation_label_enum():
    with pytest.raises(ValueError):
        MatchAnnotation(pair_id="q", annotator_id="x", label="maybe")
