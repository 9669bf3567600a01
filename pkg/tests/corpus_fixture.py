"""Builds the bundled six-paper fixture corpus.

Three shuffle groups of two papers each: journal-a with one category,
journal-a with two categories, journal-b. Comment topics are arranged so the
scripted matcher produces overlap between the model and the reviewers, some
cross-reviewer clusters (including one raised by three reviewers), and zero
overlap once feedback is shuffled onto a different paper.

Run ``python3 tests/corpus_fixture.py`` to regenerate tests/fixtures/corpus.jsonl.
"""
from __future__ import annotations

from pathlib import Path

from reviewscope.corpus import CorpusManifest, PaperRecord, ReviewRecord, write_corpus

FIXTURE_DIR = Path(__file__).parent / "fixtures"
FIXTURE_CORPUS_PATH = FIXTURE_DIR / "corpus.jsonl"

PHYS = "physical sciences"
EARTH = "earth and environmental sciences"
BIO = "biological sciences"

# (paper_id, venue, categories, model focus topics, reviews as (reviewer, topics))
FIXTURE_DESIGN = [
    ("p1", "journal-a", (PHYS,), ["baselines", "clarity", "datasets"],
     [("r1", ["baselines", "novelty"]),
      ("r2", ["baselines", "clarity", "ethics"])]),
    ("p2", "journal-a", (PHYS,), ["methods", "significance"],
     [("r1", ["methods", "presentation", "speed"]),
      ("r2", ["datasets", "significance"])]),
    ("p3", "journal-a", (PHYS, EARTH), ["sampling", "stats"],
     [("r1", ["sampling", "stats"]),
      ("r2", ["stats", "sampling"]),
      ("r3", ["sampling", "funding"])]),
    ("p4", "journal-a", (PHYS, EARTH), ["reproducibility"],
     [("r1", ["reproducibility"]),
      ("r2", ["novelty"])]),
    ("p5", "journal-b", (BIO,), ["controls", "validation"],
     [("r1", ["controls", "ethics"]),
      ("r2", ["validation", "controls"])]),
    ("p6", "journal-b", (BIO,), ["datasets"],
     [("r1", ["datasets"]),
      ("r2", ["figures"])]),
]


def paper_body(paper_id: str, focus: list[str]) -> str:
    return (
        f"paper-id: {paper_id}\n"
        f"focus: {' '.join(focus)}\n"
        f"This study examines the question behind {paper_id} with a mixture of "
        "simulation and measurement, reporting effect sizes across settings."
    )


def review_text(paper_id: str, topics: list[str]) -> str:
    lines = ["The manuscript tackles a relevant problem and reads reasonably well."]
    for topic in topics:
        lines.append(f"- We are concerned about {topic} in this work [topic:{topic}] [paper:{paper_id}]")
    lines.append("We would reconsider after a careful revision.")
    return "\n".join(lines)


def build_fixture_manifest() -> CorpusManifest:
    papers = []
    reviews = []
    for paper_id, venue, categories, focus, paper_reviews in FIXTURE_DESIGN:
        papers.append(PaperRecord(
            paper_id=paper_id,
            venue=venue,
            year=2024,
            title=f"Fixture study {paper_id}",
            abstract=f"We investigate the central question of {paper_id}.",
            captions=(f"Overview of the {paper_id} measurement setup.",),
            body_text=paper_body(paper_id, focus),
            root_categories=frozenset(categories),
            decision="accepted",
        ))
        for position, (reviewer, topics) in enumerate(paper_reviews, start=1):
            reviews.append(ReviewRecord(
                paper_id=paper_id,
                reviewer_id=reviewer,
                source="human",
                raw_text=review_text(paper_id, topics),
                position=position,
            ))
    return CorpusManifest(papers=tuple(papers), reviews=tuple(reviews),
                          provenance={"source": "bundled fixture"})


if __name__ == "__main__":
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    write_corpus(build_fixture_manifest(), FIXTURE_CORPUS_PATH)
    print(f"wrote {FIXTURE_CORPUS_PATH}")
