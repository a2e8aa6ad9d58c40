"""Compiled filter sets and URL matching with exception precedence."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

from . import _kernel
from .rules import FilterRule, RuleKind, Skipped, ThirdParty, parse_rule

_KIND_TO_ANCHOR = {
    RuleKind.HOST_ANCHORED: _kernel.ANCHOR_HOST,
    RuleKind.START_ANCHORED: _kernel.ANCHOR_START,
    RuleKind.END_ANCHORED: _kernel.ANCHOR_PLAIN,
    RuleKind.PLAIN: _kernel.ANCHOR_PLAIN,
}

_INDEX_KEY_LEN = 8
_SPLIT_SPECIALS = re.compile(r"[*^]")


@dataclass(frozen=True)
class MatchResult:
    matched: bool
    rule: FilterRule | None = None
    exception: FilterRule | None = None


@dataclass
class ParseStats:
    parsed: int = 0
    skipped: int = 0
    skipped_reasons: Counter = field(default_factory=Counter)
    unsupported_options: Counter = field(default_factory=Counter)


def _index_key(pattern: str) -> str | None:
    """First 8-byte wildcard-free substring of the pattern, if any."""
    for segment in _SPLIT_SPECIALS.split(pattern):
        if len(segment) >= _INDEX_KEY_LEN:
            return segment[:_INDEX_KEY_LEN]
    return None


def _host_span(lurl: str) -> tuple[int, int]:
    start = len("http://")
    end = len(lurl)
    for i in range(start, len(lurl)):
        if lurl[i] in ":/?":
            end = i
            break
    return start, end


def _same_site(host: str, origin_domain: str) -> bool:
    return host == origin_domain or host.endswith("." + origin_domain)


def _options_allow(rule: FilterRule, host: str, origin_domain: str | None) -> bool:
    opts = rule.options
    if opts.include_domains:
        if origin_domain is None:
            return False
        if not any(_same_site(origin_domain, d) for d in opts.include_domains):
            return False
    if opts.exclude_domains and origin_domain is not None:
        if any(_same_site(origin_domain, d) for d in opts.exclude_domains):
            return False
    if opts.third_party is not ThirdParty.IGNORE:
        if origin_domain is None:
            return True  # no origin: third-party state unknowable, applicable
        first_party = _same_site(host, origin_domain)
        if opts.third_party is ThirdParty.REQUIRE and first_party:
            return False
        if opts.third_party is ThirdParty.FORBID and not first_party:
            return False
    return True


def _rule_matches(rule: FilterRule, lurl: str, host_start: int, host_end: int,
                  origin_domain: str | None) -> bool:
    host = lurl[host_start:host_end]
    if not _options_allow(rule, host, origin_domain):
        return False
    return _kernel.match_pattern(
        rule.pattern, lurl, host_start, host_end,
        _KIND_TO_ANCHOR[rule.kind], rule.end_anchored,
    )


class FilterSet:
    """An immutable, indexed collection of compiled filter rules.

    The substring index is a pure accelerator: matching with the index
    enabled gives the same verdict as a linear scan over every rule.
    """

    def __init__(self, blocking_rules, exception_rules, stats, source_hash=None):
        self.blocking_rules: list[FilterRule] = list(blocking_rules)
        self.exception_rules: list[FilterRule] = list(exception_rules)
        self.stats: ParseStats = stats
        self.source_hash: str | None = source_hash
        self._block_index, self._block_always = self._build_index(self.blocking_rules)
        self._exc_index, self._exc_always = self._build_index(self.exception_rules)

    @staticmethod
    def _build_index(rules):
        index: dict[str, list[int]] = {}
        always: list[int] = []
        for i, rule in enumerate(rules):
            key = _index_key(rule.pattern)
            if key is None:
                always.append(i)
            else:
                index.setdefault(key, []).append(i)
        return index, always

    @staticmethod
    def _candidates(index, always, lurl):
        ids = set(always)
        for i in range(len(lurl) - _INDEX_KEY_LEN + 1):
            hits = index.get(lurl[i:i + _INDEX_KEY_LEN])
            if hits:
                ids.update(hits)
        return sorted(ids)

    def _first_match(self, rules, index, always, lurl, host_start, host_end,
                     origin_domain, use_index):
        if use_index:
            candidate_ids = self._candidates(index, always, lurl)
        else:
            candidate_ids = range(len(rules))
        for i in candidate_ids:
            if _rule_matches(rules[i], lurl, host_start, host_end, origin_domain):
                return rules[i]
        return None

    def match_url(self, url: str, origin_domain: str | None = None,
                  use_index: bool = True) -> MatchResult:
        """Match a URL; exceptions have absolute precedence over blocks."""
        if not url.lower().startswith("http://"):
            raise ValueError(f"match_url requires an http:// URL, got {url!r}")
        lurl = url.lower()
        origin = origin_domain.lower() if origin_domain else None
        host_start, host_end = _host_span(lurl)
        block = self._first_match(
            self.blocking_rules, self._block_index, self._block_always,
            lurl, host_start, host_end, origin, use_index)
        if block is None:
            return MatchResult(matched=False)
        exc = self._first_match(
            self.exception_rules, self._exc_index, self._exc_always,
            lurl, host_start, host_end, origin, use_index)
        if exc is not None:
            return MatchResult(matched=False, exception=exc)
        return MatchResult(matched=True, rule=block)

    def __len__(self):
        return len(self.blocking_rules) + len(self.exception_rules)


def compile_filters(lines, source_hash: str | None = None) -> FilterSet:
    """Compile an iterable of filter-list lines into an immutable FilterSet.

    Per-line failures degrade to Skipped and are tallied in stats.
    """
    blocking: list[FilterRule] = []
    exceptions: list[FilterRule] = []
    stats = ParseStats()
    for line in lines:
        parsed = parse_rule(line)
        if isinstance(parsed, Skipped):
            stats.skipped += 1
            stats.skipped_reasons[parsed.reason] += 1
            continue
        stats.parsed += 1
        for opt in parsed.options.unsupported_options:
            stats.unsupported_options[opt] += 1
        if parsed.is_exception:
            exceptions.append(parsed)
        else:
            blocking.append(parsed)
    return FilterSet(blocking, exceptions, stats, source_hash=source_hash)
