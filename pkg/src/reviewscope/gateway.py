"""Provider-agnostic chat-completion gateway with content-addressed
transcript caching and live/record/replay modes.

Every downstream stage calls the model through this module, so a recorded
run can be replayed byte-identically with zero network activity.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import requests

from .errors import ConfigError, ProviderError, ReplayMissError, TransportError
from .tokens import count_tokens

PURPOSES = ("review_generation", "extraction", "matching")
FINISH_STATES = ("complete", "truncated", "refused")
MODES = ("live", "record", "replay")


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.0
    max_output_tokens: int = 1024

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output_tokens <= 0:
            raise ConfigError(f"max_output_tokens must be > 0, got {self.max_output_tokens}")


@dataclass(frozen=True)
class CompletionRequest:
    model_id: str
    prompt_text: str
    sampling: SamplingParams = SamplingParams()
    purpose_tag: str = "review_generation"

    def __post_init__(self):
        if not self.prompt_text:
            raise ConfigError("prompt_text must be non-empty")
        if self.purpose_tag not in PURPOSES:
            raise ConfigError(f"purpose_tag {self.purpose_tag!r} not one of {PURPOSES}")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_state: str
    transcript_key: str


def transcript_key(request: CompletionRequest) -> str:
    """Content hash identifying a completion request.

    SHA-256 hex digest of the canonical JSON object
    ``{"model_id": ..., "prompt_text": ..., "sampling": {"max_output_tokens":
    ..., "temperature": ...}}`` serialized with sorted keys, compact
    separators, and ASCII escaping. Any field change yields a different key.
    """
    canonical = json.dumps(
        {
            "model_id": request.model_id,
            "prompt_text": request.prompt_text,
            "sampling": {
                "max_output_tokens": request.sampling.max_output_tokens,
                "temperature": float(request.sampling.temperature),
            },
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class TranscriptStore:
    """Directory of JSON files named by transcript key, one request/response
    pair per file. Writes are atomic (temp file + rename), so concurrent
    writers are safe."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, request: CompletionRequest, text: str, finish_state: str) -> None:
        record = {
            "request": {
                "model_id": request.model_id,
                "prompt_text": request.prompt_text,
                "sampling": {
                    "temperature": request.sampling.temperature,
                    "max_output_tokens": request.sampling.max_output_tokens,
                },
                "purpose_tag": request.purpose_tag,
            },
            "response": {"text": text, "finish_state": finish_state},
        }
        tmp = self.directory / f".tmp-{uuid.uuid4().hex}"
        tmp.write_text(json.dumps(record, ensure_ascii=False, indent=2), encoding="utf-8")
        os.replace(tmp, self._path(key))


class Transport(Protocol):
    def send(self, request: CompletionRequest) -> tuple[str, str]:
        """Return (text, finish_state). Raise TransportError for transient
        network failures, ProviderError for service errors."""
        ...


_FINISH_MAP = {"stop": "complete", "length": "truncated", "content_filter": "refused"}


class HttpChatTransport:
    """Minimal chat-completions HTTP client. Credentials come from an
    environment variable, never from files or flags."""

    def __init__(self, endpoint: str, api_key_env: str = "REVIEWSCOPE_API_KEY", timeout: float = 120.0):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.timeout = timeout
        key = os.environ.get(api_key_env)
        if not key:
            raise ConfigError(f"credentials missing: set the {api_key_env} environment variable")
        self._key = key

    def send(self, request: CompletionRequest) -> tuple[str, str]:
        payload = {
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt_text}],
            "temperature": request.sampling.temperature,
            "max_tokens": request.sampling.max_output_tokens,
        }
        try:
            resp = requests.post(
                self.endpoint,
                json=payload,
                headers={"Authorization": f"Bearer {self._key}"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(f"provider unreachable: {exc}") from exc
        if resp.status_code >= 400:
            retryable = resp.status_code == 429 or resp.status_code >= 500
            raise ProviderError(
                f"provider error (status {resp.status_code})",
                status=resp.status_code,
                body=resp.text[:500],
                retryable=retryable,
            )
        try:
            body = resp.json()
            choice = body["choices"][0]
            text = choice["message"]["content"] or ""
            finish = choice.get("finish_reason", "stop")
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"provider response malformed: {exc}",
                                body=resp.text[:500]) from exc
        return text, _FINISH_MAP.get(finish, "complete")


class Gateway:
    """Thread-safe completion front end.

    live: one network call with bounded retries on transient failures.
    record: like live, but the transcript is persisted; a request whose
    transcript already exists is served from the store without a call.
    replay: transcripts only, never the network (transport may be None).
    """

    def __init__(
        self,
        mode: str,
        store: TranscriptStore,
        transport: Transport | None = None,
        retries: int = 3,
        backoff: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
        max_in_flight: int = 4,
        model_window: int | None = None,
        window_tokenizer_id: str = "approx",
    ):
        if mode not in MODES:
            raise ConfigError(f"mode {mode!r} not one of {MODES}")
        if mode in ("live", "record") and transport is None:
            raise ConfigError(f"{mode} mode requires a transport")
        self.mode = mode
        self.store = store
        self.transport = transport
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep
        self.model_window = model_window
        self.window_tokenizer_id = window_tokenizer_id
        self._slots = threading.Semaphore(max_in_flight)

    def _check_window(self, request: CompletionRequest) -> None:
        if self.model_window is None:
            return
        used = count_tokens(request.prompt_text, self.window_tokenizer_id)
        if used + request.sampling.max_output_tokens > self.model_window:
            raise ConfigError(
                f"prompt ({used} tokens) plus max_output_tokens "
                f"({request.sampling.max_output_tokens}) exceeds the "
                f"{self.model_window}-token model window"
            )

    def _send_with_retries(self, request: CompletionRequest) -> tuple[str, str]:
        assert self.transport is not None
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                return self.transport.send(request)
            except TransportError as exc:
                last = exc
            except ProviderError as exc:
                if not exc.retryable:
                    raise
                last = exc
            if attempt < self.retries:
                self.sleep(self.backoff * (2 ** attempt))
        raise ProviderError(f"provider failed after {self.retries} retries: {last}") from last

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        key = transcript_key(request)
        self._check_window(request)
        if self.mode == "replay":
            record = self.store.get(key)
            if record is None:
                raise ReplayMissError(key)
            resp = record["response"]
            return CompletionResponse(resp["text"], resp["finish_state"], key)
        if self.mode == "record":
            record = self.store.get(key)
            if record is not None:
                resp = record["response"]
                return CompletionResponse(resp["text"], resp["finish_state"], key)
        with self._slots:
            text, finish = self._send_with_retries(request)
        if self.mode == "record":
            self.store.put(key, request, text, finish)
        return CompletionResponse(text, finish, key)
