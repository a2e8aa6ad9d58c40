"""URL classification (Ad / Tracker / Other) and domain rollups."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .filter_engine import FilterSet
from .psl import PublicSuffixList, bundled_psl, is_ip_literal


class UrlClass(enum.Enum):
    AD = "ad"
    TRACKER = "tracker"
    OTHER = "other"


@dataclass(frozen=True)
class UrlClassification:
    url: str
    url_class: UrlClass
    matched_rule: str | None
    fqdn: str
    registrable_domain: str
    is_ip: bool = False


@dataclass(frozen=True)
class DomainCategoryAssignment:
    registrable_domain: str
    category: str
    fqdn_votes: dict = field(default_factory=dict)


UNCATEGORIZED = "uncategorized"


def extract_fqdn(url: str) -> str:
    """Hostname of an http:// URL: lowercased, port and userinfo stripped."""
    low = url.lower()
    if not low.startswith("http://"):
        raise ValueError(f"expected http:// URL, got {url!r}")
    rest = low[len("http://"):]
    for i, ch in enumerate(rest):
        if ch in "/?#":
            rest = rest[:i]
            break
    if "@" in rest:
        rest = rest.rsplit("@", 1)[1]
    if ":" in rest and not rest.startswith("["):
        rest = rest.split(":", 1)[0]
    if not rest:
        raise ValueError(f"URL has empty host: {url!r}")
    return rest


def registrable_domain(fqdn: str, suffix_list: PublicSuffixList | None = None) -> str:
    """eTLD+1 for fqdn; IP literals pass through unchanged."""
    psl = suffix_list if suffix_list is not None else bundled_psl()
    return psl.registrable_domain(fqdn)


def classify_url(url: str, ad_set: FilterSet, tracker_set: FilterSet,
                 suffix_list: PublicSuffixList | None = None,
                 origin_domain: str | None = None) -> UrlClassification:
    """Classify one URL; the ad list takes precedence over the tracker list."""
    fqdn = extract_fqdn(url)
    domain = registrable_domain(fqdn, suffix_list)
    ad = ad_set.match_url(url, origin_domain=origin_domain)
    if ad.matched:
        cls, rule = UrlClass.AD, ad.rule.raw
    else:
        tr = tracker_set.match_url(url, origin_domain=origin_domain)
        if tr.matched:
            cls, rule = UrlClass.TRACKER, tr.rule.raw
        else:
            cls, rule = UrlClass.OTHER, None
    return UrlClassification(
        url=url, url_class=cls, matched_rule=rule,
        fqdn=fqdn, registrable_domain=domain, is_ip=is_ip_literal(fqdn),
    )


def majority_category(fqdn_categories: dict, domain: str,
                      url_counts: dict | None = None) -> DomainCategoryAssignment:
    """Roll FQDN-level category labels up to one domain-level category.

    The winning label has the most FQDN votes; ties break first on total
    URLs covered by the label, then on the (case-insensitively) smallest
    label.  FQDNs with a missing/empty category vote "uncategorized".
    """
    if not fqdn_categories:
        raise ValueError(f"no FQDN categories for domain {domain!r}")
    votes: dict[str, int] = {}
    urls: dict[str, int] = {}
    for fqdn, label in fqdn_categories.items():
        label = label or UNCATEGORIZED
        votes[label] = votes.get(label, 0) + 1
        count = url_counts.get(fqdn, 1) if url_counts else 1
        urls[label] = urls.get(label, 0) + count
    winner = min(votes, key=lambda c: (-votes[c], -urls[c], c.lower()))
    return DomainCategoryAssignment(
        registrable_domain=domain, category=winner, fqdn_votes=votes)
