"""Parsing of Adblock-syntax filter rules (EasyList/EasyPrivacy grammar)."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field


class RuleKind(enum.Enum):
    HOST_ANCHORED = "host_anchored"    # ||example.com^
    START_ANCHORED = "start_anchored"  # |http://example.com
    END_ANCHORED = "end_anchored"      # swf|  (end anchor only)
    PLAIN = "plain"


class ThirdParty(enum.Enum):
    REQUIRE = "require"
    FORBID = "forbid"
    IGNORE = "ignore"


# Resource-type options are syntactically valid but not enforceable from
# packet traces; they are retained for diagnostics only.
_RESOURCE_TYPE_OPTIONS = {
    "script", "image", "stylesheet", "object", "xmlhttprequest",
    "object-subrequest", "subdocument", "document", "elemhide", "popup",
    "websocket", "webrtc", "font", "media", "ping", "other", "background",
    "genericblock", "generichide", "dtd",
}

_COSMETIC_MARKERS = ("##", "#@#", "#?#", "#$#")

# A '$' splits pattern from options only when the suffix looks like an
# option list (EasyList patterns occasionally contain a literal '$').
_OPTIONS_RE = re.compile(r"^~?[a-zA-Z][a-zA-Z0-9~_=|.,*/-]*$")


@dataclass(frozen=True)
class RuleOptions:
    include_domains: frozenset[str] = frozenset()
    exclude_domains: frozenset[str] = frozenset()
    third_party: ThirdParty = ThirdParty.IGNORE
    unsupported_options: frozenset[str] = frozenset()


@dataclass(frozen=True)
class FilterRule:
    raw: str
    kind: RuleKind
    pattern: str               # lowercased; '*' wildcard, '^' separator
    is_exception: bool
    end_anchored: bool         # trailing '|' (may combine with any kind)
    options: RuleOptions = field(default=RuleOptions())


@dataclass(frozen=True)
class Skipped:
    raw: str
    reason: str


def _parse_options(text: str) -> RuleOptions:
    include: set[str] = set()
    exclude: set[str] = set()
    third_party = ThirdParty.IGNORE
    unsupported: set[str] = set()
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        low = token.lower()
        if low == "third-party":
            third_party = ThirdParty.REQUIRE
        elif low == "~third-party":
            third_party = ThirdParty.FORBID
        elif low.startswith("domain="):
            for entry in low[len("domain="):].split("|"):
                entry = entry.strip()
                if not entry:
                    continue
                if entry.startswith("~"):
                    exclude.add(entry[1:])
                else:
                    include.add(entry)
        else:
            unsupported.add(token)
    # a domain listed both plain and '~'-prefixed is contradictory;
    # the exclusion wins so the sets stay disjoint
    include -= exclude
    return RuleOptions(
        include_domains=frozenset(include),
        exclude_domains=frozenset(exclude),
        third_party=third_party,
        unsupported_options=frozenset(unsupported),
    )


def parse_rule(line: str) -> FilterRule | Skipped:
    """Parse one filter-list line into a FilterRule, or Skipped(reason).

    Comments, empty lines, element-hiding (cosmetic) rules, and regex
    rules are Skipped.  Unknown ``$`` options never fail a rule; they are
    recorded in options.unsupported_options.
    """
    raw = line
    text = line.strip()
    if not text:
        return Skipped(raw, "empty line")
    if text.startswith("!") or text.startswith("[Adblock"):
        return Skipped(raw, "comment")
    for marker in _COSMETIC_MARKERS:
        if marker in text:
            return Skipped(raw, "element-hiding")

    is_exception = text.startswith("@@")
    if is_exception:
        text = text[2:]

    options = RuleOptions()
    dollar = text.rfind("$")
    if dollar > 0 and _OPTIONS_RE.match(text[dollar + 1:]):
        options = _parse_options(text[dollar + 1:])
        text = text[:dollar]

    if len(text) > 2 and text.startswith("/") and text.endswith("/"):
        return Skipped(raw, "regex rule")

    kind = RuleKind.PLAIN
    if text.startswith("||"):
        kind = RuleKind.HOST_ANCHORED
        text = text[2:]
    elif text.startswith("|"):
        kind = RuleKind.START_ANCHORED
        text = text[1:]

    end_anchored = text.endswith("|")
    if end_anchored:
        text = text[:-1]
        if kind is RuleKind.PLAIN:
            kind = RuleKind.END_ANCHORED

    pattern = text.lower()
    if not pattern.strip("*"):
        return Skipped(raw, "empty pattern")

    return FilterRule(
        raw=raw,
        kind=kind,
        pattern=pattern,
        is_exception=is_exception,
        end_anchored=end_anchored,
        options=options,
    )
