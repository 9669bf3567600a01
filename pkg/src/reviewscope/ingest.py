"""Turn a paper PDF (via an external parsing service) or a pre-parsed file
into the prompt-ready document text."""
from __future__ import annotations

import json
import time
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import requests

from .corpus import PaperRecord
from .errors import ConfigError, DocumentUnusableError, ProviderError, TransportError


def _clean_text(text: str) -> str:
    """Strip control characters, keeping newlines and tabs."""
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return "".join(ch for ch in text if ch in "\n\t" or unicodedata.category(ch) != "Cc")


@dataclass(frozen=True)
class ParsedDocument:
    title: str
    abstract: str = ""
    captions: tuple[str, ...] = ()
    body_text: str = ""

    def __post_init__(self):
        object.__setattr__(self, "title", _clean_text(self.title).strip())
        object.__setattr__(self, "abstract", _clean_text(self.abstract))
        object.__setattr__(self, "captions", tuple(_clean_text(c) for c in self.captions))
        object.__setattr__(self, "body_text", _clean_text(self.body_text))
        if not self.title:
            raise DocumentUnusableError("document unusable: no title")

    def to_json(self) -> dict:
        return {
            "title": self.title,
            "abstract": self.abstract,
            "captions": list(self.captions),
            "body_text": self.body_text,
        }


def document_from_paper(paper: PaperRecord) -> ParsedDocument:
    return ParsedDocument(
        title=paper.title,
        abstract=paper.abstract,
        captions=paper.captions,
        body_text=paper.body_text,
    )


def load_parsed_document(path) -> ParsedDocument:
    """Offline mode: read a pre-parsed document in the ParsedDocument JSON shape."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return ParsedDocument(
        title=str(obj.get("title", "")),
        abstract=str(obj.get("abstract", "")),
        captions=tuple(str(c) for c in obj.get("captions", [])),
        body_text=str(obj.get("body_text", "")),
    )


# Field maps name where each document field lives in the service response:
# dotted key paths for JSON responses, element tag names for XML responses.
DEFAULT_JSON_FIELD_MAP = {
    "title": "title",
    "abstract": "abstract",
    "captions": "captions",
    "body_text": "body_text",
}
DEFAULT_XML_FIELD_MAP = {
    "title": "article-title",
    "abstract": "abstract",
    "captions": "caption",
    "body_text": "body",
}


@dataclass(frozen=True)
class ParseServiceConfig:
    endpoint: str
    json_field_map: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_JSON_FIELD_MAP))
    xml_field_map: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_XML_FIELD_MAP))
    retries: int = 3
    backoff: float = 0.5
    timeout: float = 60.0


def _dig(obj, dotted_path: str):
    cur = obj
    for part in dotted_path.split("."):
        if not isinstance(cur, Mapping) or part not in cur:
            return None
        cur = cur[part]
    return cur


def _fields_from_json(payload: Mapping, fmap: Mapping[str, str]) -> dict:
    captions = _dig(payload, fmap["captions"]) or []
    if isinstance(captions, str):
        captions = [captions]
    return {
        "title": str(_dig(payload, fmap["title"]) or ""),
        "abstract": str(_dig(payload, fmap["abstract"]) or ""),
        "captions": tuple(str(c) for c in captions),
        "body_text": str(_dig(payload, fmap["body_text"]) or ""),
    }


def _element_text(el: ET.Element) -> str:
    return " ".join("".join(el.itertext()).split())


def _fields_from_xml(text: str, fmap: Mapping[str, str]) -> dict:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ProviderError(f"parse service returned unparseable XML: {exc}", body=text[:500])
    # Ignore XML namespaces: match on the local part of each tag.
    def matches(el, tag):
        return el.tag == tag or el.tag.split("}")[-1] == tag

    def first(tag):
        for el in root.iter():
            if matches(el, tag):
                return _element_text(el)
        return ""

    captions = tuple(_element_text(el) for el in root.iter() if matches(el, fmap["captions"]))
    return {
        "title": first(fmap["title"]),
        "abstract": first(fmap["abstract"]),
        "captions": captions,
        "body_text": first(fmap["body_text"]),
    }


def parse_pdf(
    pdf_bytes: bytes,
    config: ParseServiceConfig,
    post: Callable | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ParsedDocument:
    """POST the PDF to the parsing service and map its response.

    Service failures surface status and body; transient transport errors are
    retried with backoff up to ``config.retries`` times. A response with no
    title makes the document unusable.
    """
    if not config.endpoint:
        raise ConfigError("parse service endpoint not configured")
    post = post or requests.post
    last_exc: Exception | None = None
    for attempt in range(config.retries + 1):
        try:
            resp = post(
                config.endpoint,
                data=pdf_bytes,
                headers={"Content-Type": "application/pdf"},
                timeout=config.timeout,
            )
            break
        except requests.RequestException as exc:
            last_exc = exc
            if attempt < config.retries:
                sleep(config.backoff * (2 ** attempt))
    else:
        raise TransportError(
            f"parse service unreachable after {config.retries} retries: {last_exc}"
        ) from last_exc

    status = getattr(resp, "status_code", 200)
    if status >= 400:
        body = getattr(resp, "text", "")
        raise ProviderError(f"parse service error (status {status})", status=status, body=body[:500])

    content_type = ""
    headers = getattr(resp, "headers", None)
    if headers:
        content_type = headers.get("Content-Type", "")
    if "xml" in content_type.lower():
        fields = _fields_from_xml(resp.text, config.xml_field_map)
    else:
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ProviderError(f"parse service returned unparseable JSON: {exc}",
                                body=getattr(resp, "text", "")[:500]) from exc
        fields = _fields_from_json(payload, config.json_field_map)
    if not fields["title"].strip():
        raise DocumentUnusableError("document unusable: parse service response has no title")
    return ParsedDocument(**fields)


def assemble_prompt_text(doc: ParsedDocument) -> str:
    """Concatenate title, abstract, labelled captions, then body text, with a
    blank line between parts. Caption labels are regenerated, not trusted
    from the parser. Deterministic."""
    parts = [doc.title]
    if doc.abstract.strip():
        parts.append(doc.abstract)
    for idx, caption in enumerate(doc.captions, start=1):
        parts.append(f"Figure {idx} Caption: {caption}")
    if doc.body_text.strip():
        parts.append(doc.body_text)
    return "\n\n".join(parts)
