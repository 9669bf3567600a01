"""Robust extraction of JSON objects from model output.

Model responses routinely wrap JSON in code fences, prepend or append prose,
or leave a trailing comma. We recover by scanning for the first balanced
JSON object that actually parses.
"""
from __future__ import annotations

import json
import re

from .errors import ParseFailure

_TRAILING_COMMA = re.compile(r",\s*([}\]])")


def first_json_object(text: str) -> dict:
    """Return the first balanced, parseable JSON object embedded in ``text``.

    Brace balancing is string- and escape-aware. A candidate that fails to
    parse is retried once with trailing commas removed; otherwise scanning
    continues from the next opening brace. Raises ParseFailure when no
    object can be recovered.
    """
    start = text.find("{")
    while start != -1:
        end = _balanced_end(text, start)
        if end is not None:
            candidate = text[start:end + 1]
            for attempt in (candidate, _TRAILING_COMMA.sub(r"\1", candidate)):
                try:
                    obj = json.loads(attempt)
                except json.JSONDecodeError:
                    continue
                if isinstance(obj, dict):
                    return obj
        start = text.find("{", start + 1)
    raise ParseFailure("no balanced JSON object found in response", raw_text=text)


def _balanced_end(text: str, start: int) -> int | None:
    depth = 0
    in_string = False
    escaped = False
    for idx in range(start, len(text)):
        ch = text[idx]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return idx
    return None
