"""Public-suffix list handling: registrable-domain (eTLD+1) extraction.

Reads the standard one-rule-per-line text format with ``!`` exception
rules and ``*`` wildcard labels.  A pinned snapshot is bundled with the
package for reproducibility; any standard suffix-list file can be
supplied instead.
"""

from __future__ import annotations

import importlib.resources
import re
from functools import lru_cache

_IPV4_RE = re.compile(r"^\d{1,3}(?:\.\d{1,3}){3}$")

BUNDLED_SNAPSHOT = "public_suffix_snapshot.dat"


def is_ip_literal(host: str) -> bool:
    return bool(_IPV4_RE.match(host)) or (host.startswith("[") and host.endswith("]"))


class PublicSuffixList:
    """Compiled suffix rules supporting the standard matching algorithm."""

    def __init__(self, lines):
        # rules grouped by final label; suffix-list wildcards never occupy
        # the final label, so this is a sound partition
        self._rules: dict[str, list[tuple[str, ...]]] = {}
        self._exceptions: dict[str, list[tuple[str, ...]]] = {}
        for line in lines:
            line = line.strip()
            if not line or line.startswith("//"):
                continue
            # the list format terminates a rule at the first whitespace
            rule = line.split()[0].lower()
            exception = rule.startswith("!")
            if exception:
                rule = rule[1:]
            labels = tuple(rule.split("."))
            if not all(labels):
                continue
            bucket = self._exceptions if exception else self._rules
            bucket.setdefault(labels[-1], []).append(labels)

    @classmethod
    def from_file(cls, path) -> "PublicSuffixList":
        with open(path, encoding="utf-8") as fh:
            return cls(fh)

    def _rule_matches(self, rule: tuple[str, ...], labels: tuple[str, ...]) -> bool:
        if len(rule) > len(labels):
            return False
        tail = labels[len(labels) - len(rule):]
        return all(r == "*" or r == t for r, t in zip(rule, tail))

    def public_suffix_length(self, fqdn: str) -> int:
        """Number of labels in the public suffix of fqdn."""
        labels = tuple(fqdn.lower().split("."))
        tld = labels[-1]
        for exc in self._exceptions.get(tld, ()):
            if self._rule_matches(exc, labels):
                return len(exc) - 1
        best = 1  # unmatched TLDs are treated as suffixes ("*" default rule)
        for rule in self._rules.get(tld, ()):
            if len(rule) > best and self._rule_matches(rule, labels):
                best = len(rule)
        return best

    def is_public_suffix(self, fqdn: str) -> bool:
        labels = fqdn.lower().split(".")
        return len(labels) <= self.public_suffix_length(fqdn)

    def registrable_domain(self, fqdn: str) -> str:
        """eTLD+1 of fqdn; IP literals and bare suffixes return themselves."""
        if not fqdn:
            raise ValueError("empty hostname")
        host = fqdn.lower().rstrip(".")
        if is_ip_literal(host):
            return host
        labels = host.split(".")
        ps_len = self.public_suffix_length(host)
        if len(labels) <= ps_len:
            return host  # fqdn is itself a public suffix
        return ".".join(labels[len(labels) - ps_len - 1:])


@lru_cache(maxsize=1)
def bundled_psl() -> PublicSuffixList:
    data = (importlib.resources.files("netlens") / "data" / BUNDLED_SNAPSHOT)
    with data.open(encoding="utf-8") as fh:
        return PublicSuffixList(fh)
