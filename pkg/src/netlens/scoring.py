"""Per-app suspicion scoring, rankings, and aggregate statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

from .classifier import UrlClass, UrlClassification, extract_fqdn, registrable_domain
from .http_model import AppMetadata
from .reputation import STATUS_OK, UrlReport

# Popular ad/tracking domains flagged by reputation engines yet manually
# verified legitimate; excluded from scoring by default.
DEFAULT_WHITELIST = frozenset({
    "xiti.com",
    "api.airpush.com",
    "scorecardresearch.com",
    "bluekai.com",
    "ad.leadboltapps.net",
})

DEFAULT_ALPHA = 3.0
DEFAULT_BETA = 1.0

RANK_AXES = ("by_urls", "by_domains", "by_ad_urls", "by_tracker_urls",
             "by_suspicion")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ScoringConfig:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    whitelist: frozenset = DEFAULT_WHITELIST
    positives_threshold: int = 0   # "suspicious" means positives > threshold

    def __post_init__(self):
        if self.alpha < 1 or self.beta < 1:
            raise ConfigError(
                f"alpha and beta must be >= 1 (got {self.alpha}, {self.beta})")

    def whitelist_domains(self, suffix_list=None) -> frozenset:
        """Whitelist normalized to registrable domains (FQDN entries roll up)."""
        return frozenset(
            registrable_domain(entry, suffix_list) for entry in self.whitelist)


@dataclass
class AppProfile:
    app_id: str
    metadata: AppMetadata
    urls: frozenset                      # distinct full URLs
    classifications: dict                # url -> UrlClassification
    reports: dict                        # url -> UrlReport
    counts: dict = field(default_factory=dict)
    suspicion_score: float = 0.0

    @staticmethod
    def compute_counts(urls, classifications) -> dict:
        ad = sum(1 for u in urls
                 if classifications[u].url_class is UrlClass.AD)
        tracker = sum(1 for u in urls
                      if classifications[u].url_class is UrlClass.TRACKER)
        domains = {classifications[u].registrable_domain for u in urls}
        return {
            "distinct_urls": len(urls),
            "distinct_domains": len(domains),
            "ad_urls": ad,
            "tracker_urls": tracker,
        }

    def domains(self) -> set:
        return {self.classifications[u].registrable_domain for u in self.urls}


def build_profile(app_id, metadata, urls, classifications, reports,
                  config: ScoringConfig | None = None,
                  suffix_list=None) -> AppProfile:
    config = config or ScoringConfig()
    profile = AppProfile(
        app_id=app_id,
        metadata=metadata,
        urls=frozenset(urls),
        classifications=dict(classifications),
        reports=dict(reports),
    )
    profile.counts = AppProfile.compute_counts(profile.urls,
                                               profile.classifications)
    profile.suspicion_score = app_suspicion_score(profile, config,
                                                  suffix_list=suffix_list)
    return profile


def _positives(report: UrlReport | None) -> int:
    if report is None or report.status != STATUS_OK:
        return 0  # unknown/unavailable URLs contribute nothing
    return report.positives


def app_suspicion_score(profile: AppProfile, config: ScoringConfig,
                        suffix_list=None) -> float:
    """sum(p_i ** alpha) * d ** beta over non-whitelisted URLs.

    p_i is the engine-positive count for URL i; d is the number of
    distinct registrable domains over URLs with p_i above the threshold.
    No suspicious URL left after whitelisting means score 0.
    """
    whitelist = config.whitelist_domains(suffix_list)
    total = 0.0
    flagged_domains = set()
    for url in profile.urls:
        cls = profile.classifications.get(url)
        domain = cls.registrable_domain if cls is not None else \
            registrable_domain(extract_fqdn(url), suffix_list)
        if domain in whitelist:
            continue
        p = _positives(profile.reports.get(url))
        if p > config.positives_threshold:
            total += p ** config.alpha
            flagged_domains.add(domain)
    if not flagged_domains:
        return 0.0
    return total * len(flagged_domains) ** config.beta


_AXIS_VALUE = {
    "by_urls": lambda p: p.counts["distinct_urls"],
    "by_domains": lambda p: p.counts["distinct_domains"],
    "by_ad_urls": lambda p: p.counts["ad_urls"],
    "by_tracker_urls": lambda p: p.counts["tracker_urls"],
    "by_suspicion": lambda p: p.suspicion_score,
}


def rank_apps(profiles, axis: str, n: int) -> list[tuple[str, float]]:
    """Top-n apps by the given axis, descending; ties by app name ascending."""
    if axis not in _AXIS_VALUE:
        raise ValueError(f"unknown ranking axis {axis!r}")
    value = _AXIS_VALUE[axis]
    ranked = sorted(((p.metadata.name or p.app_id, value(p))
                     for p in profiles),
                    key=lambda pair: (-pair[1], pair[0]))
    return ranked[:n]


def category_matrix(profiles, domain_categories: dict) -> dict:
    """app-category x domain-category percentages of distinct domains.

    Rows are app store categories; each full row sums to 100.  App
    categories whose apps contacted no domains are absent (not zeroed).
    """
    domains_by_app_cat: dict[str, set] = {}
    for profile in profiles:
        cat = profile.metadata.category
        domains_by_app_cat.setdefault(cat, set()).update(profile.domains())
    matrix: dict[str, dict[str, float]] = {}
    for app_cat, domains in sorted(domains_by_app_cat.items()):
        if not domains:
            continue
        counts: dict[str, int] = {}
        for domain in domains:
            dom_cat = domain_categories.get(domain, "uncategorized")
            counts[dom_cat] = counts.get(dom_cat, 0) + 1
        row = {c: 100.0 * k / len(domains) for c, k in sorted(counts.items())}
        matrix[app_cat] = row
    return matrix


def _quartile(sorted_values, q: float) -> float:
    """Linear interpolation between order statistics."""
    n = len(sorted_values)
    if n == 1:
        return float(sorted_values[0])
    h = (n - 1) * q
    lo = int(h)
    frac = h - lo
    if lo + 1 >= n:
        return float(sorted_values[-1])
    return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo])


def distribution_summary(values) -> dict:
    """Five-number summary plus 1.5-IQR outliers (boxplot convention)."""
    values = sorted(values)
    if not values:
        raise ValueError("distribution_summary of an empty sequence")
    q1 = _quartile(values, 0.25)
    median = _quartile(values, 0.5)
    q3 = _quartile(values, 0.75)
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    outliers = [v for v in values if v < lo_fence or v > hi_fence]
    return {
        "min": float(values[0]),
        "q1": q1,
        "median": median,
        "q3": q3,
        "max": float(values[-1]),
        "outliers": outliers,
    }
