"""Batched, cached client for URL/domain reputation lookups.

Two interchangeable backends: a live HTTP JSON service and an offline
fixture directory.  All pipeline tests run against fixtures, which makes
the whole analysis hermetic and byte-deterministic.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass

log = logging.getLogger(__name__)

CACHE_SCHEMA_VERSION = 1

STATUS_OK = "ok"
STATUS_UNKNOWN = "unknown"
STATUS_UNAVAILABLE = "unavailable"

SAFETY_VERDICTS = ("safe", "unsure", "suspicious", "malicious")

DEFAULT_BATCH_SIZE = 25
DEFAULT_RATE_LIMIT = 4.0  # queries per minute (typical free tier)


class ProtocolError(Exception):
    """Malformed provider response."""


class UndefinedScoreError(Exception):
    """suspicion_fraction on a report with no engine coverage."""


@dataclass(frozen=True)
class UrlReport:
    url: str
    engine_verdicts: dict
    positives: int
    total_engines: int
    retrieved_at: float
    status: str = STATUS_OK

    def __post_init__(self):
        flagged = sum(1 for v in self.engine_verdicts.values() if v)
        if self.positives != flagged:
            raise ValueError("positives must equal the count of true verdicts")
        if self.total_engines and self.positives > self.total_engines:
            raise ValueError("positives cannot exceed total_engines")

    def to_dict(self):
        return {
            "url": self.url,
            "engine_verdicts": dict(sorted(self.engine_verdicts.items())),
            "positives": self.positives,
            "total_engines": self.total_engines,
            "retrieved_at": self.retrieved_at,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            url=d["url"],
            engine_verdicts=dict(d.get("engine_verdicts", {})),
            positives=d["positives"],
            total_engines=d["total_engines"],
            retrieved_at=d.get("retrieved_at", 0.0),
            status=d.get("status", STATUS_OK),
        )


@dataclass(frozen=True)
class DomainReport:
    registrable_domain: str
    categories: dict            # fqdn -> category label
    safety_verdict: str
    retrieved_at: float
    status: str = STATUS_OK

    def __post_init__(self):
        if self.safety_verdict not in SAFETY_VERDICTS:
            raise ValueError(f"invalid safety verdict {self.safety_verdict!r}")

    def to_dict(self):
        return {
            "registrable_domain": self.registrable_domain,
            "categories": dict(sorted(self.categories.items())),
            "safety_verdict": self.safety_verdict,
            "retrieved_at": self.retrieved_at,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            registrable_domain=d["registrable_domain"],
            categories=dict(d.get("categories", {})),
            safety_verdict=d["safety_verdict"],
            retrieved_at=d.get("retrieved_at", 0.0),
            status=d.get("status", STATUS_OK),
        )


class ReputationCache:
    """Write-through JSON cache; load after flush reproduces contents."""

    def __init__(self, path):
        self.path = path
        self.url_reports: dict[str, UrlReport] = {}
        self.domain_reports: dict[str, DomainReport] = {}
        if path and os.path.exists(path):
            self.load()

    def load(self):
        with open(self.path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("schema_version") != CACHE_SCHEMA_VERSION:
            raise ValueError(
                f"unsupported cache schema {doc.get('schema_version')!r}")
        self.url_reports = {
            u: UrlReport.from_dict(d) for u, d in doc["url_reports"].items()}
        self.domain_reports = {
            k: DomainReport.from_dict(d)
            for k, d in doc["domain_reports"].items()}

    def flush(self):
        if not self.path:
            return
        doc = {
            "schema_version": CACHE_SCHEMA_VERSION,
            "url_reports": {
                u: r.to_dict() for u, r in sorted(self.url_reports.items())},
            "domain_reports": {
                k: r.to_dict() for k, r in sorted(self.domain_reports.items())},
        }
        with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def fixture_key(kind: str, value: str) -> str:
    digest = hashlib.sha256(f"{kind}:{value}".encode()).hexdigest()
    return digest[:16]


class FixtureBackend:
    """Offline backend reading one JSON document per known URL/domain."""

    def __init__(self, directory):
        self.directory = directory
        self.calls = 0
        index_path = os.path.join(directory, "index.json")
        with open(index_path, encoding="utf-8") as fh:
            self.index = json.load(fh)

    def _load(self, kind, value):
        name = self.index.get(f"{kind}:{value}")
        if name is None:
            return None
        with open(os.path.join(self.directory, name), encoding="utf-8") as fh:
            return json.load(fh)

    def query_url_batch(self, urls):
        self.calls += 1
        return {url: self._load("url", url) for url in urls}

    def query_domain(self, domain):
        self.calls += 1
        return self._load("domain", domain)


class HttpBackend:
    """Live JSON-over-HTTP backend (VirusTotal-shaped wire format).

    URL responses: {positives, total, scans: {engine: {detected: bool}}}.
    Domain responses: {categories: {fqdn: label}, webutation_verdict: str}.
    """

    def __init__(self, url_endpoint, domain_endpoint, api_key=None, session=None):
        self.url_endpoint = url_endpoint
        self.domain_endpoint = domain_endpoint
        self.api_key = api_key or os.environ.get("REPUTATION_API_KEY", "")
        if session is None:
            import requests
            session = requests.Session()
        self.session = session
        self.calls = 0

    def query_url_batch(self, urls):
        self.calls += 1
        resp = self.session.post(
            self.url_endpoint,
            json={"apikey": self.api_key, "urls": list(urls)},
            timeout=30,
        )
        resp.raise_for_status()
        doc = resp.json()
        if not isinstance(doc, dict) or "results" not in doc:
            raise ProtocolError(f"bad URL batch response for {len(urls)} URLs")
        return {url: doc["results"].get(url) for url in urls}

    def query_domain(self, domain):
        self.calls += 1
        resp = self.session.get(
            self.domain_endpoint,
            params={"apikey": self.api_key, "domain": domain},
            timeout=30,
        )
        resp.raise_for_status()
        doc = resp.json()
        if doc is not None and not isinstance(doc, dict):
            raise ProtocolError(f"bad domain response for {domain!r}")
        return doc


class RateLimiter:
    """Spaces backend calls at most rate_limit per minute."""

    def __init__(self, per_minute, clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / per_minute if per_minute else 0.0
        self.clock = clock
        self.sleep = sleep
        self._last = None

    def wait(self):
        if not self.interval:
            return
        now = self.clock()
        if self._last is not None:
            remaining = self._last + self.interval - now
            if remaining > 0:
                self.sleep(remaining)
                now = self.clock()
        self._last = now


def _url_report_from_raw(url, raw, now):
    if raw is None:
        return UrlReport(url=url, engine_verdicts={}, positives=0,
                         total_engines=0, retrieved_at=now,
                         status=STATUS_UNKNOWN)
    try:
        scans = raw.get("scans", {})
        verdicts = {name: bool(entry.get("detected"))
                    for name, entry in scans.items()}
        positives = int(raw["positives"])
        total = int(raw["total"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed URL report for {url!r}: {exc}") from exc
    retrieved = raw.get("retrieved_at", now)
    return UrlReport(url=url, engine_verdicts=verdicts, positives=positives,
                     total_engines=total, retrieved_at=retrieved)


def lookup_or_query(urls, cache, provider, batch_size=DEFAULT_BATCH_SIZE,
                    rate_limit=DEFAULT_RATE_LIMIT, max_retries=3,
                    clock=time.monotonic, sleep=time.sleep,
                    now=time.time) -> dict[str, UrlReport]:
    """Resolve UrlReports for every URL, serving cache hits locally.

    Misses are deduplicated, batched, rate-limited and written through to
    the cache.  Backend failures degrade to per-URL "unavailable" reports
    after bounded exponential-backoff retries.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    results: dict[str, UrlReport] = {}
    misses: list[str] = []
    seen = set()
    for url in urls:
        cached = cache.url_reports.get(url)
        if cached is not None:
            results[url] = cached
        elif url not in seen:
            seen.add(url)
            misses.append(url)
    limiter = RateLimiter(rate_limit, clock=clock, sleep=sleep)
    for start in range(0, len(misses), batch_size):
        batch = misses[start:start + batch_size]
        raw_batch = None
        delay = 1.0
        for attempt in range(max_retries + 1):
            limiter.wait()
            try:
                raw_batch = provider.query_url_batch(batch)
                break
            except ProtocolError:
                raise
            except Exception as exc:  # noqa: BLE001 - network-layer failure
                log.warning("reputation batch failed (attempt %d): %s",
                            attempt + 1, exc)
                if attempt < max_retries:
                    sleep(delay)
                    delay *= 2
        stamp = now()
        if raw_batch is None:
            for url in batch:
                results[url] = UrlReport(
                    url=url, engine_verdicts={}, positives=0, total_engines=0,
                    retrieved_at=stamp, status=STATUS_UNAVAILABLE)
            continue
        for url in batch:
            report = _url_report_from_raw(url, raw_batch.get(url), stamp)
            results[url] = report
            cache.url_reports[url] = report
    cache.flush()
    return results


def lookup_or_query_domains(domains, cache, provider,
                            rate_limit=DEFAULT_RATE_LIMIT, max_retries=3,
                            clock=time.monotonic, sleep=time.sleep,
                            now=time.time) -> dict[str, DomainReport]:
    """DomainReport lookup with the same cache/rate-limit discipline."""
    results: dict[str, DomainReport] = {}
    limiter = RateLimiter(rate_limit, clock=clock, sleep=sleep)
    for domain in domains:
        cached = cache.domain_reports.get(domain)
        if cached is not None:
            results[domain] = cached
            continue
        raw = None
        fetched = False
        delay = 1.0
        for attempt in range(max_retries + 1):
            limiter.wait()
            try:
                raw = provider.query_domain(domain)
                fetched = True
                break
            except ProtocolError:
                raise
            except Exception as exc:  # noqa: BLE001
                log.warning("domain lookup failed (attempt %d): %s",
                            attempt + 1, exc)
                if attempt < max_retries:
                    sleep(delay)
                    delay *= 2
        stamp = now()
        if not fetched:
            report = DomainReport(registrable_domain=domain, categories={},
                                  safety_verdict="unsure", retrieved_at=stamp,
                                  status=STATUS_UNAVAILABLE)
        elif raw is None:
            report = DomainReport(registrable_domain=domain, categories={},
                                  safety_verdict="unsure", retrieved_at=stamp,
                                  status=STATUS_UNKNOWN)
            cache.domain_reports[domain] = report
        else:
            verdict = raw.get("webutation_verdict", "unsure")
            if verdict not in SAFETY_VERDICTS:
                raise ProtocolError(
                    f"bad safety verdict {verdict!r} for {domain!r}")
            report = DomainReport(
                registrable_domain=domain,
                categories=dict(raw.get("categories", {})),
                safety_verdict=verdict,
                retrieved_at=raw.get("retrieved_at", stamp),
            )
            cache.domain_reports[domain] = report
        results[domain] = report
    cache.flush()
    return results


def suspicion_fraction(report: UrlReport) -> float:
    """positives / total_engines; undefined when the URL was never scanned."""
    if report.total_engines <= 0:
        raise UndefinedScoreError(
            f"no engine coverage for {report.url!r}; treat as unknown")
    return report.positives / report.total_engines


def domain_safety_histogram(reports) -> dict[str, float]:
    """Fractions of the four safety verdicts over a report collection."""
    reports = list(reports)
    if not reports:
        raise ValueError("cannot build a histogram from zero reports")
    counts = {v: 0 for v in SAFETY_VERDICTS}
    for report in reports:
        counts[report.safety_verdict] += 1
    total = len(reports)
    return {v: counts[v] / total for v in SAFETY_VERDICTS}
