"""Review-generation prompt templates, the single-pass generation call, and
the four-section feedback parser."""
from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import PaperRecord
from .errors import ConfigError, ParseFailure
from .gateway import CompletionRequest, CompletionResponse, Gateway, SamplingParams
from .ingest import ParsedDocument, assemble_prompt_text, document_from_paper
from .tokens import TokenBudgetConfig, truncate_to_budget

VENUE_FLAVORS = ("nature_family", "ml_conference")

NATURE_REVIEW_TEMPLATE = """\
Your task now is to draft a high-quality review outline for a Nature family journal for a submission titled <Title>:
<Paper_content>
_____
Your task:
Compose a high-quality peer review of a paper submitted to a Nature family journal.
Start by "Review outline:".
And then:
"1. Significance and novelty"
"2. Potential reasons for acceptance"
"3. Potential reasons for rejection", List multiple key reasons. For each key reason, use **>=2 sub bullet points** to further clarify and support your arguments in painstaking details. Be as specific and detailed as possible.
"4. Suggestions for improvement", List multiple key suggestions. Be as specific and detailed as possible.
Be thoughtful and constructive. Write Outlines only.
"""

ML_CONFERENCE_REVIEW_TEMPLATE = """\
Your task now is to draft a high-quality review outline for a top-tier Machine Learning (ML) conference for a submission titled <Title>:
<Paper_content>
_____
Your task:
Compose a high-quality peer review of an ML paper submitted to a top-tier ML conference on OpenReview.
Start by "Review outline:".
And then:
"1. Significance and novelty"
"2. Potential reasons for acceptance"
"3. Potential reasons for rejection", List multiple key reasons. For each key reason, use **>=2 sub bullet points** to further clarify and support your arguments in painstaking details. Be as specific and detailed as possible.
"4. Suggestions for improvement", List multiple key suggestions. Be as specific and detailed as possible.
Be thoughtful and constructive. Write Outlines only.
"""

REVIEW_TEMPLATES = {
    "nature_family": NATURE_REVIEW_TEMPLATE,
    "ml_conference": ML_CONFERENCE_REVIEW_TEMPLATE,
}

SECTION_HEADERS = (
    "Significance and novelty",
    "Potential reasons for acceptance",
    "Potential reasons for rejection",
    "Suggestions for improvement",
)
SECTION_FIELDS = ("significance_novelty", "reasons_accept", "reasons_reject", "suggestions")


@dataclass(frozen=True)
class ReviewPrompt:
    venue_flavor: str
    title: str
    paper_content: str
    rendered: str


@dataclass(frozen=True)
class StructuredFeedback:
    significance_novelty: str
    reasons_accept: str
    reasons_reject: str
    suggestions: str
    raw_text: str

    def sections(self) -> dict[str, str]:
        return {name: getattr(self, name) for name in SECTION_FIELDS}


def build_review_prompt(title: str, content: str, flavor: str) -> ReviewPrompt:
    """Substitute title and pre-truncated paper content into the instruction
    template for the venue flavor. Byte-identical for identical inputs."""
    if flavor not in REVIEW_TEMPLATES:
        raise ConfigError(f"unknown venue flavor {flavor!r}; known: {sorted(REVIEW_TEMPLATES)}")
    if not title.strip():
        raise ValueError("title must be non-empty")
    if not content.strip():
        raise ValueError("paper content must be non-empty")
    rendered = REVIEW_TEMPLATES[flavor].replace("<Title>", title).replace("<Paper_content>", content)
    return ReviewPrompt(venue_flavor=flavor, title=title, paper_content=content, rendered=rendered)


def canonical_header(index: int) -> str:
    return f"{index}. {SECTION_HEADERS[index - 1]}"


def _header_pattern(index: int) -> re.Pattern:
    # Tolerate quote marks, asterisks, markdown heading markers, and the
    # numbering styles "1." / "1)" / "1:". The numeral itself is required so
    # ordering violations stay detectable.
    words = re.escape(SECTION_HEADERS[index - 1]).replace(r"\ ", r"\s+")
    return re.compile(
        rf'["\'“”*#\s]*{index}\s*[.):]?\s*{words}\s*["\'“”]?[*:]*',
        re.IGNORECASE,
    )


def parse_feedback_sections(text: str) -> StructuredFeedback:
    """Split feedback text on the four numbered section headers.

    An optional "Review outline:" preamble is dropped. Missing, duplicated,
    out-of-order, or empty sections raise ParseFailure naming the problem.
    """
    matches = []
    missing = []
    for index in range(1, 5):
        found = list(_header_pattern(index).finditer(text))
        if not found:
            missing.append(canonical_header(index))
        elif len(found) > 1:
            raise ParseFailure(
                f"duplicated section header {canonical_header(index)!r}", raw_text=text
            )
        else:
            matches.append(found[0])
    if missing:
        raise ParseFailure("missing section headers: " + "; ".join(missing), raw_text=text)
    starts = [m.start() for m in matches]
    if starts != sorted(starts):
        order = sorted(range(4), key=lambda i: starts[i])
        rendered = " < ".join(canonical_header(i + 1) for i in order)
        raise ParseFailure(f"section headers out of order (found {rendered})", raw_text=text)
    bodies = []
    for pos, match in enumerate(matches):
        end = matches[pos + 1].start() if pos + 1 < len(matches) else len(text)
        body = text[match.end():end].strip()
        if not body:
            raise ParseFailure(
                f"empty section {canonical_header(pos + 1)!r}", raw_text=text
            )
        bodies.append(body)
    return StructuredFeedback(*bodies, raw_text=text)


@dataclass(frozen=True)
class GeneratedFeedback:
    paper_id: str
    flavor: str
    transcript_key: str
    feedback: StructuredFeedback

    def to_json(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "flavor": self.flavor,
            "transcript_key": self.transcript_key,
            "sections": self.feedback.sections(),
            "raw_text": self.feedback.raw_text,
        }


def generate_feedback(
    source: PaperRecord | ParsedDocument,
    gateway: Gateway,
    flavor: str,
    model_id: str,
    budget: TokenBudgetConfig | None = None,
    sampling: SamplingParams | None = None,
    paper_id: str | None = None,
) -> GeneratedFeedback:
    """Assemble, truncate, prompt, and parse in exactly one completion call.

    Raises ParseFailure (raw text preserved) when the response does not carry
    the four sections; gateway errors propagate unchanged.
    """
    if isinstance(source, PaperRecord):
        doc = document_from_paper(source)
        paper_id = paper_id or source.paper_id
    else:
        doc = source
        paper_id = paper_id or doc.title
    budget = budget or TokenBudgetConfig()
    content = truncate_to_budget(assemble_prompt_text(doc), budget)
    prompt = build_review_prompt(doc.title, content, flavor)
    request = CompletionRequest(
        model_id=model_id,
        prompt_text=prompt.rendered,
        sampling=sampling or SamplingParams(),
        purpose_tag="review_generation",
    )
    response: CompletionResponse = gateway.complete(request)
    try:
        feedback = parse_feedback_sections(response.text)
    except ParseFailure as exc:
        exc.raw_text = response.text
        raise
    return GeneratedFeedback(
        paper_id=paper_id,
        flavor=flavor,
        transcript_key=response.transcript_key,
        feedback=feedback,
    )
