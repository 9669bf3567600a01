"""Pluggable tokenizers, token counting, and prefix truncation to a budget.

The exact tokenizer of the hosted model is proprietary, so counting is done
by a registered pure function. The default ``approx`` tokenizer splits on
word/punctuation boundaries; ``whitespace`` splits on whitespace only. A
subword vocabulary file can be registered for closer parity with a hosted
model's counts.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .errors import ConfigError

# A span function maps text to (start, end) offsets of consecutive tokens.
SpanFn = Callable[[str], list[tuple[int, int]]]

_REGISTRY: dict[str, SpanFn] = {}

_WORD_PUNCT = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_NONSPACE = re.compile(r"\S+")


def register_tokenizer(tokenizer_id: str, span_fn: SpanFn) -> None:
    _REGISTRY[tokenizer_id] = span_fn


def tokenizer_ids() -> list[str]:
    return sorted(_REGISTRY)


def token_spans(text: str, tokenizer_id: str) -> list[tuple[int, int]]:
    try:
        fn = _REGISTRY[tokenizer_id]
    except KeyError:
        raise ConfigError(
            f"unknown tokenizer_id {tokenizer_id!r}; registered: {tokenizer_ids()}"
        ) from None
    return fn(text)


def count_tokens(text: str, tokenizer_id: str) -> int:
    """Deterministic token count; non-decreasing under concatenation for the
    built-in splitters."""
    return len(token_spans(text, tokenizer_id))


def _word_punct_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in _WORD_PUNCT.finditer(text)]


def _whitespace_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in _NONSPACE.finditer(text)]


register_tokenizer("approx", _word_punct_spans)
register_tokenizer("whitespace", _whitespace_spans)


def make_subword_tokenizer(vocab: Iterable[str]) -> SpanFn:
    """Greedy longest-match over a vocabulary; characters not covered by any
    entry count as one token each. Whitespace separates chunks and is never
    part of a token."""
    entries = {v for v in (v.strip("\n") for v in vocab) if v and not v.isspace()}
    if not entries:
        raise ConfigError("subword vocabulary is empty")
    max_len = max(len(v) for v in entries)

    def spans(text: str) -> list[tuple[int, int]]:
        out: list[tuple[int, int]] = []
        for chunk in _NONSPACE.finditer(text):
            start, end = chunk.span()
            pos = start
            while pos < end:
                for length in range(min(max_len, end - pos), 0, -1):
                    if text[pos:pos + length] in entries:
                        break
                else:
                    length = 1
                out.append((pos, pos + length))
                pos += length
        return out

    return spans


def register_subword_tokenizer(tokenizer_id: str, vocab_path) -> None:
    vocab = Path(vocab_path).read_text(encoding="utf-8").splitlines()
    register_tokenizer(tokenizer_id, make_subword_tokenizer(vocab))


@dataclass(frozen=True)
class TokenBudgetConfig:
    input_budget: int = 6500
    model_window: int = 8192
    tokenizer_id: str = "approx"

    def __post_init__(self):
        if not 0 < self.input_budget < self.model_window:
            raise ConfigError(
                f"require 0 < input_budget < model_window, "
                f"got {self.input_budget} / {self.model_window}"
            )


def truncate_to_budget(text: str, budget: TokenBudgetConfig) -> str:
    """Longest prefix of ``text``, cut at a token boundary, whose token count
    fits the input budget. Text already within budget is returned unchanged."""
    spans = token_spans(text, budget.tokenizer_id)
    if len(spans) <= budget.input_budget:
        return text
    cut = spans[budget.input_budget - 1][1]
    return text[:cut]
