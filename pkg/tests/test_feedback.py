import re
from pathlib import Path

import pytest

from reviewscope.corpus import PaperRecord
from reviewscope.errors import ConfigError, ParseFailure
from reviewscope.feedback import (
    SECTION_HEADERS,
    build_review_prompt,
    canonical_header,
    generate_feedback,
    parse_feedback_sections,
)
from reviewscope.gateway import Gateway, TranscriptStore
from reviewscope.tokens import TokenBudgetConfig, count_tokens

from fake_llm import CountingTransport, ScriptedModel

GOLDEN = Path(__file__).parent / "golden"


def outline(sections=None, preamble="Review outline:"):
    sections = sections or [f"body of section {i}" for i in range(1, 5)]
    lines = [preamble] if preamble else []
    for index, body in enumerate(sections, start=1):
        lines.append(f"{index}. {SECTION_HEADERS[index - 1]}")
        lines.append(body)
    return "\n".join(lines)


def test_nature_prompt_matches_golden_file():
    rendered = build_review_prompt("T", "C", "nature_family").rendered
    assert rendered == GOLDEN.joinpath("review_prompt_nature.txt").read_text(encoding="utf-8")
    assert "Nature family journal" in rendered
    assert 'Start by "Review outline:".' in rendered
    assert "**>=2 sub bullet points**" in rendered
    for index in range(1, 5):
        assert f'"{canonical_header(index)}"' in rendered


def test_ml_prompt_matches_golden_file():
    rendered = build_review_prompt("T", "C", "ml_conference").rendered
    assert rendered == GOLDEN.joinpath("review_prompt_ml.txt").read_text(encoding="utf-8")
    assert "top-tier Machine Learning (ML) conference" in rendered
    assert "OpenReview" in rendered


def test_prompt_substitutes_title_and_content():
    rendered = build_review_prompt("A Question of Scale", "BODY GOES HERE", "nature_family").rendered
    assert "A Question of Scale" in rendered
    assert "BODY GOES HERE" in rendered


def test_prompt_preconditions():
    with pytest.raises(ValueError):
        build_review_prompt("", "C", "nature_family")
    with pytest.raises(ValueError):
        build_review_prompt("T", "   ", "nature_family")
    with pytest.raises(ConfigError, match="unknown venue flavor"):
        build_review_prompt("T", "C", "workshop")


def test_prompt_token_count_stays_within_budget_plus_overhead():
    budget = TokenBudgetConfig(input_budget=50, model_window=4096)
    template_overhead = count_tokens(
        build_review_prompt("x", "y", "nature_family").rendered, "approx"
    )
    content = " ".join(f"w{i}" for i in range(50))
    rendered = build_review_prompt("Title here", content, "nature_family").rendered
    assert count_tokens(rendered, "approx") <= budget.input_budget + template_overhead + 10


def test_parse_canonical_outline():
    feedback = parse_feedback_sections(outline(["s1", "s2", "s3", "s4"]))
    assert feedback.significance_novelty == "s1"
    assert feedback.reasons_accept == "s2"
    assert feedback.reasons_reject == "s3"
    assert feedback.suggestions == "s4"
    assert feedback.raw_text.startswith("Review outline:")


def test_parse_drops_review_outline_preamble():
    feedback = parse_feedback_sections(outline(preamble="Review outline:"))
    assert "Review outline" not in feedback.significance_novelty


def test_parse_tolerates_quotes_asterisks_and_case():
    text = "\n".join([
        '"1. Significance and novelty"',
        "alpha",
        "**2) POTENTIAL REASONS FOR ACCEPTANCE**",
        "beta",
        "3. Potential Reasons For Rejection:",
        "gamma",
        "## 4. suggestions for improvement",
        "delta",
    ])
    feedback = parse_feedback_sections(text)
    assert feedback.sections() == {
        "significance_novelty": "alpha",
        "reasons_accept": "beta",
        "reasons_reject": "gamma",
        "suggestions": "delta",
    }


def test_parse_missing_section_named():
    text = outline()
    clipped = text[: text.index("4. Suggestions")]
    with pytest.raises(ParseFailure, match="4. Suggestions for improvement"):
        parse_feedback_sections(clipped)


def test_parse_duplicated_header():
    text = outline() + "\n3. Potential reasons for rejection\nagain"
    with pytest.raises(ParseFailure, match="duplicated"):
        parse_feedback_sections(text)


@pytest.mark.parametrize("order", [(1, 3, 2, 4), (2, 1, 3, 4), (4, 2, 3, 1), (1, 2, 4, 3)])
def test_parse_out_of_order_headers(order):
    lines = ["Review outline:"]
    for index in order:
        lines.append(f"{index}. {SECTION_HEADERS[index - 1]}")
        lines.append(f"body {index}")
    with pytest.raises(ParseFailure, match="out of order"):
        parse_feedback_sections("\n".join(lines))


def test_parse_empty_section_rejected():
    with pytest.raises(ParseFailure, match="empty section"):
        parse_feedback_sections(outline(["s1", "s2", "   ", "s4"]))


def test_round_trip_reconstructs_raw_text_modulo_whitespace():
    text = outline(["alpha beta", "gamma", "delta\n- bullet", "epsilon"], preamble=None)
    feedback = parse_feedback_sections(text)
    rebuilt = "\n".join(
        f"{canonical_header(i)}\n{body}"
        for i, body in enumerate(feedback.sections().values(), start=1)
    )
    normalize = lambda s: re.sub(r"\s+", " ", s).strip()
    assert normalize(rebuilt) == normalize(text)


PAPER = PaperRecord(
    paper_id="p9",
    venue="journal-a",
    year=2024,
    title="Fixture study p9",
    abstract="We investigate p9.",
    captions=("Setup overview.",),
    body_text="paper-id: p9\nfocus: baselines clarity\nLong body text.",
    decision="accepted",
)


def test_generate_feedback_via_replay_is_deterministic(tmp_path):
    store = TranscriptStore(tmp_path / "t")
    record = Gateway(mode="record", store=store, transport=ScriptedModel())
    first = generate_feedback(PAPER, record, flavor="nature_family", model_id="gpt-4")
    assert set(first.feedback.sections()) == {
        "significance_novelty", "reasons_accept", "reasons_reject", "suggestions"}
    assert all(first.feedback.sections().values())
    assert "[topic:baselines]" in first.feedback.reasons_reject

    replay = Gateway(mode="replay", store=store)
    second = generate_feedback(PAPER, replay, flavor="nature_family", model_id="gpt-4")
    third = generate_feedback(PAPER, replay, flavor="nature_family", model_id="gpt-4")
    assert second == third
    assert second.feedback == first.feedback
    assert second.transcript_key == first.transcript_key


def test_generate_feedback_is_a_single_call(tmp_path):
    store = TranscriptStore(tmp_path / "t")
    transport = CountingTransport(text=outline())
    gateway = Gateway(mode="live", store=store, transport=transport)
    generate_feedback(PAPER, gateway, flavor="nature_family", model_id="gpt-4")
    assert transport.calls == 1


def test_generate_feedback_parse_failure_preserves_raw(tmp_path):
    bad = outline()[: outline().index("4. Suggestions")]
    store = TranscriptStore(tmp_path / "t")
    gateway = Gateway(mode="live", store=store, transport=CountingTransport(text=bad))
    with pytest.raises(ParseFailure) as err:
        generate_feedback(PAPER, gateway, flavor="nature_family", model_id="gpt-4")
    assert err.value.raw_text == bad
