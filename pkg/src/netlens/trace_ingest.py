"""Trace ingestion: pcap and URL-log parsing, baseline filtering."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .http_model import UNKNOWN_ENDPOINT, HttpRequest, normalize_host
from .pcap import PcapStats, parse_pcap_with_stats

log = logging.getLogger(__name__)


@dataclass
class UrlLogStats:
    lines: int = 0
    comments: int = 0
    malformed: int = 0
    requests: int = 0


def parse_pcap(path, ports=frozenset({80})) -> list[HttpRequest]:
    """All recoverable HTTP/1.x requests from a classic pcap, in time order."""
    requests, _ = parse_pcap_with_stats(path, ports=ports)
    return requests


def parse_pcap_stats(path, ports=frozenset({80})) -> tuple[list[HttpRequest], PcapStats]:
    return parse_pcap_with_stats(path, ports=ports)


def _split_url(url: str) -> tuple[str, str] | None:
    if not url.lower().startswith("http://"):
        return None
    rest = url[len("http://"):]
    cut = len(rest)
    for i, ch in enumerate(rest):
        if ch in "/?":
            cut = i
            break
    host = normalize_host(rest[:cut])
    if not host:
        return None
    path = rest[cut:] or "/"
    if path.startswith("?"):
        path = "/" + path
    return host, path


def parse_urllog(path) -> list[HttpRequest]:
    """Parse a URL-log text file: `<epoch-seconds> <METHOD> <http-url>` lines."""
    requests, _ = parse_urllog_with_stats(path)
    return requests


def parse_urllog_with_stats(path) -> tuple[list[HttpRequest], UrlLogStats]:
    stats = UrlLogStats()
    requests: list[HttpRequest] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            stats.lines += 1
            if line.startswith("#"):
                stats.comments += 1
                continue
            parts = line.split(None, 2)
            if len(parts) != 3:
                stats.malformed += 1
                log.warning("malformed url-log line: %r", line)
                continue
            ts_text, method, url = parts
            split = _split_url(url)
            if split is None:
                stats.malformed += 1
                log.warning("malformed url-log URL: %r", url)
                continue
            try:
                ts = float(ts_text)
            except ValueError:
                stats.malformed += 1
                log.warning("malformed url-log timestamp: %r", ts_text)
                continue
            host, path_and_query = split
            requests.append(HttpRequest(
                timestamp=ts,
                src_endpoint=UNKNOWN_ENDPOINT,
                dst_endpoint=UNKNOWN_ENDPOINT,
                method=method,
                host=host,
                path_and_query=path_and_query,
            ))
            stats.requests += 1
    return requests, stats


def write_urllog(requests, path) -> None:
    """Inverse of parse_urllog (endpoints are not representable)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for req in requests:
            fh.write(f"{req.timestamp!r} {req.method} {req.full_url}\n")


def filter_baseline(requests, baseline_urls) -> list[HttpRequest]:
    """Drop requests whose full URL appeared in the background baseline."""
    return [r for r in requests if r.full_url not in baseline_urls]
