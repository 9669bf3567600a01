"""Run configuration: a declarative JSON file plus CLI overrides.

Credentials are never part of the file; live and record modes read the API
key from the environment variable named here.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .corpus import STRATUM_KINDS
from .errors import ConfigError
from .gateway import MODES, Gateway, HttpChatTransport, TranscriptStore
from .matching import SIMILARITY_MAX, SIMILARITY_MIN
from .metrics import SHUFFLE_RULES, ControlPolicy
from .tokens import TokenBudgetConfig


@dataclass(frozen=True)
class RunConfig:
    mode: str = "replay"
    model_id: str = "gpt-4"
    endpoint: str | None = None
    api_key_env: str = "REVIEWSCOPE_API_KEY"
    review_temperature: float = 0.0
    max_output_tokens: int = 1024
    input_budget: int = 6500
    model_window: int = 8192
    tokenizer_id: str = "approx"
    threshold: int = 7
    control_enabled: bool = True
    seed: int | None = None
    flavor: str = "nature_family"
    corpus_path: str | None = None
    transcripts_dir: str = "transcripts"
    out_dir: str = "runs"
    run_id: str | None = None
    parallelism: int = 4
    retries: int = 3
    resamples: int = 1000
    strata_kind: str = "by_venue"
    shuffle_rule: str = "nature_journal_and_category_set"
    extraction_template_path: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode {self.mode!r} not one of {MODES}")
        if not SIMILARITY_MIN <= self.threshold <= SIMILARITY_MAX:
            raise ConfigError(
                f"threshold must be in [{SIMILARITY_MIN}, {SIMILARITY_MAX}], got {self.threshold}"
            )
        if self.shuffle_rule not in SHUFFLE_RULES:
            raise ConfigError(f"unknown shuffle rule {self.shuffle_rule!r}")
        if self.strata_kind not in STRATUM_KINDS:
            raise ConfigError(f"unknown strata kind {self.strata_kind!r}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    def with_overrides(self, **overrides) -> "RunConfig":
        filtered = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **filtered) if filtered else self

    def budget(self) -> TokenBudgetConfig:
        return TokenBudgetConfig(
            input_budget=self.input_budget,
            model_window=self.model_window,
            tokenizer_id=self.tokenizer_id,
        )

    def control_policy(self) -> ControlPolicy:
        return ControlPolicy(enabled=self.control_enabled)

    def snapshot(self) -> dict:
        return asdict(self)

    def effective_run_id(self, command: str) -> str:
        """Explicit run id, or a stable digest of command plus configuration
        so identical runs land in the same directory."""
        if self.run_id:
            return self.run_id
        canonical = json.dumps({"command": command, "config": self.snapshot()},
                               sort_keys=True, separators=(",", ":"))
        return f"{command}-{hashlib.sha256(canonical.encode()).hexdigest()[:12]}"

    def require_seed(self, why: str) -> int:
        if self.seed is None:
            raise ConfigError(f"--seed is required for {why}")
        return self.seed

    def require_corpus(self) -> Path:
        if not self.corpus_path:
            raise ConfigError("corpus path not configured")
        path = Path(self.corpus_path)
        if not path.exists():
            raise ConfigError(f"corpus file not found: {path}")
        return path

    def extraction_template(self) -> str | None:
        if not self.extraction_template_path:
            return None
        path = Path(self.extraction_template_path)
        if not path.exists():
            raise ConfigError(f"extraction template not found: {path}")
        return path.read_text(encoding="utf-8")


def make_gateway(config: RunConfig) -> Gateway:
    """Build the gateway for this run. Replay mode gets no transport at all,
    so it cannot touch the network; live and record modes require an endpoint
    and credentials in the environment."""
    store = TranscriptStore(config.transcripts_dir)
    transport = None
    if config.mode in ("live", "record"):
        if not config.endpoint:
            raise ConfigError(f"{config.mode} mode requires an endpoint")
        transport = HttpChatTransport(config.endpoint, api_key_env=config.api_key_env)
    return Gateway(
        mode=config.mode,
        store=store,
        transport=transport,
        retries=config.retries,
        max_in_flight=config.parallelism,
        model_window=config.model_window,
        window_tokenizer_id=config.tokenizer_id,
    )
