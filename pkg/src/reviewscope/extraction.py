"""Stage 1 of the retrospective pipeline: pull an ID-keyed list of criticism
points out of a feedback text with one model call, with robust JSON recovery
and a single repair retry."""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseFailure
from .gateway import CompletionRequest, Gateway, SamplingParams
from .jsonutil import first_json_object

# Default instruction template. The wording is deliberately config-editable:
# pass a different template to build_extraction_prompt or point the run
# config at a template file.
EXTRACTION_TEMPLATE = """\
Your task is to identify the key concerns raised in the review text below. Focus on criticisms: potential reasons for rejection and suggestions for improvement. Ignore praise and summaries of the paper.
Review text:
<Feedback_text>
Extract the list of the points of comments raised in the review. Provide your output as a JSON object where each key is the ID of a point (an integer, starting from 1, in the order the points appear) and each value is a string stating the point. For example:
{"1": "<first point>", "2": "<second point>"}
If the review raises no concerns, output an empty JSON object. Provide your output as JSON only.
"""

REPAIR_TEMPLATE = """\
Your previous response could not be parsed: <Problem>
Previous response:
<Malformed_output>
Restate your answer strictly as a JSON object mapping integer point IDs (as strings, starting from "1") to point text strings, with no code fences and no other text. If there are no points, output {}.
"""

_INT_KEY = re.compile(r"^[+-]?\d+$")

EXTRACTION_SAMPLING = SamplingParams(temperature=0.0, max_output_tokens=1024)


@dataclass(frozen=True)
class Comment:
    local_id: str
    ordinal: int
    text: str

    def __post_init__(self):
        if self.ordinal < 1:
            raise ValueError(f"ordinal must be >= 1, got {self.ordinal}")
        if not self.text.strip():
            raise ValueError("comment text must be non-empty")


@dataclass(frozen=True)
class CommentList:
    feedback_id: str
    comments: tuple[Comment, ...] = ()
    side_label: str | None = None

    def __post_init__(self):
        ordinals = [c.ordinal for c in self.comments]
        if ordinals != list(range(1, len(ordinals) + 1)):
            raise ValueError(f"ordinals must be dense 1..n, got {ordinals}")
        ids = [c.local_id for c in self.comments]
        if len(set(ids)) != len(ids):
            raise ValueError("local_ids must be unique")

    def __len__(self):
        return len(self.comments)

    def with_side_label(self, label: str) -> "CommentList":
        relabeled = tuple(
            Comment(local_id=f"{label}{c.ordinal}", ordinal=c.ordinal, text=c.text)
            for c in self.comments
        )
        return CommentList(feedback_id=self.feedback_id, comments=relabeled, side_label=label)

    def id_text_map(self) -> dict[str, str]:
        """Plain ordinal-keyed mapping, the shape embedded in prompts."""
        return {str(c.ordinal): c.text for c in self.comments}

    def to_json(self) -> dict:
        return {
            "feedback_id": self.feedback_id,
            "comments": [{"ordinal": c.ordinal, "text": c.text} for c in self.comments],
        }

    @classmethod
    def from_json(cls, obj, side_label: str | None = None) -> "CommentList":
        comments = tuple(
            Comment(
                local_id=f"{side_label or ''}{item['ordinal']}",
                ordinal=int(item["ordinal"]),
                text=str(item["text"]),
            )
            for item in obj.get("comments", [])
        )
        return cls(feedback_id=str(obj.get("feedback_id", "")), comments=comments, side_label=side_label)


def comment_ordinal(local_id: str) -> int:
    """Ordinal part of a local id like "A3" or "3"."""
    match = re.search(r"(\d+)$", local_id)
    if not match:
        raise ValueError(f"local id {local_id!r} has no ordinal suffix")
    return int(match.group(1))


def build_extraction_prompt(feedback_text: str, template: str = EXTRACTION_TEMPLATE) -> str:
    if not feedback_text.strip():
        raise ValueError("feedback_text must be non-empty")
    return template.replace("<Feedback_text>", feedback_text)


def build_repair_prompt(malformed_output: str, problem: str) -> str:
    return REPAIR_TEMPLATE.replace("<Problem>", problem).replace("<Malformed_output>", malformed_output)


def parse_comment_json(raw: str, feedback_id: str = "", side_label: str | None = None) -> CommentList:
    """Parse a model response into a CommentList.

    Accepts a JSON object with integer-like string keys and string values;
    code fences and surrounding prose are stripped by balanced-object
    extraction. Keys in numeric order become dense ordinals 1..n, so output
    order always equals the numeric key order of the source object. An empty
    object is an empty list, not an error. Non-integer keys and non-string
    values raise ParseFailure (the repair trigger): ordinal order feeds the
    positional analyses and must not be guessed.
    """
    obj = first_json_object(raw)
    for key, value in obj.items():
        if not _INT_KEY.match(key.strip()):
            raise ParseFailure(f"non-integer comment key {key!r}", raw_text=raw)
        if not isinstance(value, str):
            raise ParseFailure(f"comment value for key {key!r} is not a string", raw_text=raw)
        if not value.strip():
            raise ParseFailure(f"comment value for key {key!r} is empty", raw_text=raw)
    ordered = sorted(obj.items(), key=lambda kv: int(kv[0].strip()))
    comments = tuple(
        Comment(local_id=f"{side_label or ''}{pos}", ordinal=pos, text=value)
        for pos, (_, value) in enumerate(ordered, start=1)
    )
    return CommentList(feedback_id=feedback_id, comments=comments, side_label=side_label)


@dataclass(frozen=True)
class ExtractionResult:
    comment_list: CommentList
    transcript_keys: tuple[str, ...]

    def to_json(self) -> dict:
        payload = self.comment_list.to_json()
        payload["transcript_keys"] = list(self.transcript_keys)
        return payload


def extract_comments(
    feedback_text: str,
    gateway: Gateway,
    model_id: str,
    list_prefix: str = "A",
    feedback_id: str = "",
    template: str = EXTRACTION_TEMPLATE,
) -> ExtractionResult:
    """One extraction call; on a parse failure, one repair retry that feeds
    the malformed output back with a restatement of the format."""
    if not feedback_text.strip():
        raise ValueError("feedback_text must be non-empty")
    prompt = build_extraction_prompt(feedback_text, template=template)
    request = CompletionRequest(
        model_id=model_id,
        prompt_text=prompt,
        sampling=EXTRACTION_SAMPLING,
        purpose_tag="extraction",
    )
    response = gateway.complete(request)
    keys = [response.transcript_key]
    try:
        comment_list = parse_comment_json(response.text, feedback_id=feedback_id, side_label=list_prefix)
    except ParseFailure as first_error:
        repair = CompletionRequest(
            model_id=model_id,
            prompt_text=build_repair_prompt(response.text, str(first_error)),
            sampling=EXTRACTION_SAMPLING,
            purpose_tag="extraction",
        )
        retry = gateway.complete(repair)
        keys.append(retry.transcript_key)
        try:
            comment_list = parse_comment_json(retry.text, feedback_id=feedback_id, side_label=list_prefix)
        except ParseFailure as exc:
            raise ParseFailure(
                f"extraction failed after repair retry: {exc}", raw_text=retry.text
            ) from first_error
    return ExtractionResult(comment_list=comment_list, transcript_keys=tuple(keys))
