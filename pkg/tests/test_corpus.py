import json

import pytest
from hypothesis import given, strategies as st

from reviewscope.corpus import (
    CorpusManifest,
    PaperRecord,
    ReviewRecord,
    StratumKey,
    load_corpus,
    stratify,
    validate_corpus,
    write_corpus,
)
from reviewscope.errors import CorpusError

PHYS = "physical sciences"
BIO = "biological sciences"


def make_paper(pid, venue="venue-x", decision="accepted", categories=(), year=2024):
    return PaperRecord(
        paper_id=pid, venue=venue, year=year, title=f"Title {pid}",
        abstract="abs", captions=("cap",), body_text="body",
        root_categories=frozenset(categories), decision=decision,
    )


def make_review(pid, rid, position, text="- a solid concern"):
    return ReviewRecord(paper_id=pid, reviewer_id=rid, source="human",
                        raw_text=text, position=position)


def write_lines(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")


def test_load_small_fixture(tmp_path):
    manifest = CorpusManifest(
        papers=(make_paper("a"), make_paper("b")),
        reviews=tuple(make_review("a", f"r{i}", i) for i in range(1, 4))
        + tuple(make_review("b", f"r{i}", i) for i in range(1, 3)),
    )
    path = tmp_path / "c.jsonl"
    write_corpus(manifest, path)
    loaded = load_corpus(path)
    assert len(loaded.papers) == 2
    assert len(loaded.reviews) == 5
    assert [p.paper_id for p in loaded.papers] == ["a", "b"]


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    manifest = load_corpus(path)
    assert manifest.papers == ()
    assert manifest.reviews == ()


def test_load_missing_file(tmp_path):
    with pytest.raises(CorpusError, match="not found"):
        load_corpus(tmp_path / "nope.jsonl")


def test_load_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"kind": "paper"\n', encoding="utf-8")
    with pytest.raises(CorpusError, match=":1:"):
        load_corpus(path)


def test_duplicate_paper_id_names_id_and_both_lines(tmp_path):
    path = tmp_path / "dup.jsonl"
    write_lines(path, [make_paper("dup-id").to_json(), make_paper("dup-id").to_json()])
    with pytest.raises(CorpusError) as err:
        load_corpus(path)
    message = str(err.value)
    assert "dup-id" in message
    assert "line 1" in message
    assert ":2:" in message


def test_unknown_kind_rejected(tmp_path):
    path = tmp_path / "kind.jsonl"
    write_lines(path, [{"kind": "meta", "x": 1}])
    with pytest.raises(CorpusError, match="unknown record kind"):
        load_corpus(path)


def test_non_object_line_rejected(tmp_path):
    path = tmp_path / "scalar.jsonl"
    path.write_text("42\n", encoding="utf-8")
    with pytest.raises(CorpusError, match="not a JSON object"):
        load_corpus(path)


def test_validate_clean_manifest_is_empty():
    manifest = CorpusManifest(
        papers=(make_paper("a", categories=(PHYS,)),),
        reviews=(make_review("a", "r1", 1), make_review("a", "r2", 2)),
    )
    assert validate_corpus(manifest) == []


def test_validate_unknown_paper_id():
    manifest = CorpusManifest(papers=(make_paper("a"),),
                              reviews=(make_review("a", "r1", 1), make_review("ghost", "r1", 1)))
    violations = [v for v in validate_corpus(manifest) if v.rule == "review-paper-resolves"]
    assert len(violations) == 1
    assert "ghost" in violations[0].record


def test_validate_position_gap():
    manifest = CorpusManifest(papers=(make_paper("a"),),
                              reviews=(make_review("a", "r1", 1), make_review("a", "r2", 3)))
    rules = {v.rule for v in validate_corpus(manifest)}
    assert "position-gap" in rules


def test_validate_paper_without_reviews_is_warning_only():
    manifest = CorpusManifest(papers=(make_paper("a"),))
    violations = validate_corpus(manifest)
    assert [v.severity for v in violations] == ["warning"]
    assert violations[0].rule == "no-reviews"


def test_validate_bad_decision_and_category():
    manifest = CorpusManifest(
        papers=(make_paper("a", decision="maybe", categories=("astrology",)),),
        reviews=(make_review("a", "r1", 1),),
    )
    rules = {v.rule for v in validate_corpus(manifest)}
    assert rules == {"decision-enum", "category-vocabulary"}
    # a custom vocabulary makes the category legal
    manifest_ok = CorpusManifest(
        papers=(make_paper("a", categories=("astrology",)),),
        reviews=(make_review("a", "r1", 1),),
    )
    assert validate_corpus(manifest_ok, category_vocabulary=["astrology"]) == []


def test_stratify_by_decision_and_venue():
    manifest = CorpusManifest(papers=(
        make_paper("a", decision="oral"),
        make_paper("b", decision="oral"),
        make_paper("c", decision="rejected"),
    ))
    groups = stratify(manifest, "by_decision")
    sizes = {key.value: len(ids) for key, ids in groups.items()}
    assert sizes == {"oral": 2, "rejected": 1}
    venues = stratify(manifest, "by_venue")
    assert list(venues) == [StratumKey("by_venue", "venue-x")]
    assert len(venues[StratumKey("by_venue", "venue-x")]) == 3


def test_stratify_by_category_set_uses_exact_sets():
    manifest = CorpusManifest(papers=(
        make_paper("a", categories=(PHYS,)),
        make_paper("b", categories=(PHYS, BIO)),
        make_paper("c", categories=(PHYS, BIO)),
    ))
    groups = stratify(manifest, "by_category_set")
    sizes = {key.value: len(ids) for key, ids in groups.items()}
    assert sizes == {PHYS: 1, f"{BIO},{PHYS}": 2}


def test_stratify_rejects_unknown_kind():
    with pytest.raises(ValueError):
        stratify(CorpusManifest(), "by_vibes")


@given(st.integers(min_value=0, max_value=30), st.randoms(use_true_random=False))
def test_stratify_is_a_partition(n_papers, rng):
    papers = tuple(
        make_paper(
            f"p{i}",
            venue=rng.choice(["v1", "v2", "v3"]),
            decision=rng.choice(["oral", "poster", "rejected"]),
            categories=tuple(rng.sample([PHYS, BIO], rng.randint(0, 2))),
            year=rng.choice([2022, 2023]),
        )
        for i in range(n_papers)
    )
    manifest = CorpusManifest(papers=papers)
    for kind in ("by_venue", "by_decision", "by_category_set", "by_year"):
        groups = stratify(manifest, kind)
        seen = [pid for ids in groups.values() for pid in ids]
        assert len(seen) == len(set(seen)) == n_papers
        assert set(seen) == {p.paper_id for p in papers}


TEXT = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=40
).filter(lambda s: s.strip())


@given(title=TEXT, abstract=TEXT, body=TEXT, review=TEXT)
def test_write_load_round_trip(tmp_path_factory, title, abstract, body, review):
    manifest = CorpusManifest(
        papers=(PaperRecord(paper_id="p", venue="v", year=2023, title=title,
                            abstract=abstract, captions=(title, abstract),
                            body_text=body, root_categories=frozenset({PHYS}),
                            decision="accepted"),),
        reviews=(ReviewRecord(paper_id="p", reviewer_id="r", source="human",
                              raw_text=review, position=1),),
    )
    path = tmp_path_factory.mktemp("rt") / "c.jsonl"
    write_corpus(manifest, path)
    loaded = load_corpus(path)
    assert loaded.papers == manifest.papers
    assert loaded.reviews == manifest.reviews
