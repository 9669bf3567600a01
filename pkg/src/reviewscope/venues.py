"""Review-platform client: fetch submissions and their reviews for a venue
and year, with per-decision quota sampling.

Two client implementations share one record shape: an HTTP client for a
platform's JSON API and an offline fixture client reading the same shape
from a file. Field names and decision strings vary by venue, so both map
through a configurable VenueFieldMap.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Callable, Mapping

import requests

from .corpus import DECISIONS, CorpusManifest, PaperRecord, ReviewRecord
from .errors import ConfigError, ProviderError, TransportError


@dataclass(frozen=True)
class VenueFieldMap:
    """Where each record field lives in the platform's JSON (dotted paths),
    plus the mapping from platform decision strings to decision values."""

    paper_id: str = "id"
    title: str = "title"
    abstract: str = "abstract"
    captions: str = "captions"
    body_text: str = "body_text"
    decision: str = "decision"
    categories: str = "categories"
    review_id: str = "id"
    review_text: str = "text"
    review_created: str = "created"
    decision_values: Mapping[str, str] = field(default_factory=dict)

    def map_decision(self, raw) -> str:
        raw = str(raw or "")
        if raw in self.decision_values:
            return self.decision_values[raw]
        lowered = raw.lower()
        for needle, value in (
            ("oral", "oral"), ("spotlight", "spotlight"), ("poster", "poster"),
            ("withdraw", "withdrawn"), ("reject", "rejected"), ("accept", "accepted"),
        ):
            if needle in lowered:
                return value
        return "unknown"


def _dig(obj, dotted_path: str):
    cur = obj
    for part in dotted_path.split("."):
        if not isinstance(cur, Mapping) or part not in cur:
            return None
        cur = cur[part]
    return cur


class FixturePlatformClient:
    """Offline client reading platform-shaped JSON from a file:
    {"venues": {"<venue>": {"<year>": {"submissions": [...],
    "reviews": {"<paper_id>": [...]}}}}}."""

    def __init__(self, path):
        self._data = json.loads(Path(path).read_text(encoding="utf-8"))

    def _venue(self, venue: str, year: int) -> Mapping:
        venues = self._data.get("venues", {})
        if venue not in venues:
            raise ConfigError(f"unknown venue {venue!r} in fixture")
        years = venues[venue]
        if str(year) not in years:
            raise ConfigError(f"no data for venue {venue!r} year {year}")
        return years[str(year)]

    def fetch_submissions(self, venue: str, year: int) -> list[Mapping]:
        return list(self._venue(venue, year).get("submissions", []))

    def fetch_reviews(self, venue: str, year: int, paper_id: str) -> list[Mapping]:
        return list(self._venue(venue, year).get("reviews", {}).get(paper_id, []))


class HttpPlatformClient:
    """HTTP GET client for a platform exposing submissions and reviews as
    JSON. Transient failures are retried with backoff."""

    def __init__(
        self,
        base_url: str,
        retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 60.0,
        get: Callable | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._get = get or requests.get
        self._sleep = sleep

    def _get_json(self, path: str, params: Mapping) -> list:
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._get(f"{self.base_url}/{path}", params=dict(params), timeout=self.timeout)
                status = getattr(resp, "status_code", 200)
                if status == 404:
                    raise ConfigError(f"unknown venue or resource: {path} {dict(params)}")
                if status >= 400:
                    raise ProviderError(f"platform error (status {status})", status=status,
                                        body=getattr(resp, "text", "")[:500],
                                        retryable=status == 429 or status >= 500)
                try:
                    return resp.json()
                except ValueError as exc:
                    raise ProviderError(f"platform returned unparseable JSON: {exc}",
                                        body=getattr(resp, "text", "")[:500]) from exc
            except requests.RequestException as exc:
                last = exc
            except ProviderError as exc:
                if not exc.retryable:
                    raise
                last = exc
            if attempt < self.retries:
                self._sleep(self.backoff * (2 ** attempt))
        raise TransportError(f"platform unreachable after {self.retries} retries: {last}") from last

    def fetch_submissions(self, venue: str, year: int) -> list[Mapping]:
        return self._get_json("submissions", {"venue": venue, "year": year})

    def fetch_reviews(self, venue: str, year: int, paper_id: str) -> list[Mapping]:
        return self._get_json("reviews", {"venue": venue, "year": year, "paper": paper_id})


def reservoir_sample(items: list, k: int, rng: Random) -> list:
    """Algorithm R: uniform k-sample in one pass, deterministic given rng."""
    sample: list = []
    for index, item in enumerate(items):
        if index < k:
            sample.append(item)
        else:
            j = rng.randrange(index + 1)
            if j < k:
                sample[j] = item
    return sample


def fetch_venue_reviews(
    venue: str,
    year: int,
    quotas: Mapping[str, int],
    client,
    seed: int,
    field_map: VenueFieldMap | None = None,
    parallelism: int = 4,
) -> CorpusManifest:
    """Fetch papers sampled per decision stratum, with all their reviews.

    Per-decision sampling is seeded reservoir sampling, so results are
    deterministic for a given seed and source. A quota above the available
    count yields the partial stratum plus a warning in the manifest
    provenance. Reviews are positioned by the platform's creation order and
    papers aggregate sorted by paper_id regardless of fetch concurrency."""
    fmap = field_map or VenueFieldMap()
    for decision, quota in quotas.items():
        if decision not in DECISIONS:
            raise ConfigError(f"quota names unknown decision {decision!r}; known: {DECISIONS}")
        if quota < 0:
            raise ConfigError(f"quota for {decision!r} must be >= 0")
    submissions = client.fetch_submissions(venue, year)
    buckets: dict[str, list[Mapping]] = {}
    for raw in submissions:
        decision = fmap.map_decision(_dig(raw, fmap.decision))
        buckets.setdefault(decision, []).append(raw)

    warnings: list[str] = []
    chosen: list[Mapping] = []
    for decision in sorted(quotas):
        quota = quotas[decision]
        if quota == 0:
            continue
        available = buckets.get(decision, [])
        if quota > len(available):
            warnings.append(
                f"quota {quota} for decision {decision!r} exceeds {len(available)} available; "
                "returning all"
            )
            chosen.extend(available)
        else:
            rng = Random(f"{seed}:{decision}")
            chosen.extend(reservoir_sample(available, quota, rng))

    papers = []
    for raw in chosen:
        captions = _dig(raw, fmap.captions) or []
        categories = _dig(raw, fmap.categories) or []
        papers.append(PaperRecord(
            paper_id=str(_dig(raw, fmap.paper_id)),
            venue=venue,
            year=year,
            title=str(_dig(raw, fmap.title) or ""),
            abstract=str(_dig(raw, fmap.abstract) or ""),
            captions=tuple(str(c) for c in captions),
            body_text=str(_dig(raw, fmap.body_text) or ""),
            root_categories=frozenset(str(c) for c in categories),
            decision=fmap.map_decision(_dig(raw, fmap.decision)),
        ))
    papers.sort(key=lambda p: p.paper_id)

    def fetch_one(paper: PaperRecord) -> list[ReviewRecord]:
        raw_reviews = client.fetch_reviews(venue, year, paper.paper_id)
        raw_reviews = sorted(raw_reviews, key=lambda r: (_dig(r, fmap.review_created) or 0))
        records = []
        for position, raw in enumerate(raw_reviews, start=1):
            records.append(ReviewRecord(
                paper_id=paper.paper_id,
                reviewer_id=str(_dig(raw, fmap.review_id) or f"r{position}"),
                source="human",
                raw_text=str(_dig(raw, fmap.review_text) or ""),
                position=position,
            ))
        return records

    reviews: list[ReviewRecord] = []
    if papers:
        with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
            for batch in pool.map(fetch_one, papers):
                reviews.extend(batch)
    reviews.sort(key=lambda r: (r.paper_id, r.position))
    provenance = {"source": "platform", "venue": venue, "year": year, "seed": seed,
                  "warnings": warnings}
    return CorpusManifest(papers=tuple(papers), reviews=tuple(reviews), provenance=provenance)
