"""Pipeline orchestration and report-bundle construction/emission."""

from __future__ import annotations

import csv
import hashlib
import importlib.resources
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import __version__
from .classifier import UrlClass, classify_url, majority_category
from .filter_engine import FilterSet, compile_filters
from .http_model import AppMetadata, UNKNOWN_CATEGORY
from .psl import BUNDLED_SNAPSHOT, PublicSuffixList, bundled_psl
from .reputation import (
    DEFAULT_RATE_LIMIT,
    STATUS_OK,
    FixtureBackend,
    HttpBackend,
    ReputationCache,
    domain_safety_histogram,
    lookup_or_query,
    lookup_or_query_domains,
)
from .scoring import (
    RANK_AXES,
    ScoringConfig,
    build_profile,
    category_matrix,
    distribution_summary,
    rank_apps,
)
from .trace_ingest import filter_baseline, parse_pcap, parse_urllog

log = logging.getLogger(__name__)

TOP_N = 10
TOP_DOMAINS = 20


class ManifestError(Exception):
    pass


@dataclass
class ManifestEntry:
    app_id: str
    trace_path: str
    metadata_path: str


@dataclass
class CorpusManifest:
    root: str
    entries: list
    ad_list_path: str
    tracker_list_path: str
    baseline_path: str | None = None
    suffix_list_path: str | None = None
    reputation_fixtures: str | None = None
    cache_path: str | None = None

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ManifestError(f"cannot read manifest: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
        root = os.path.dirname(os.path.abspath(path))

        def resolve(rel):
            return rel if rel is None or os.path.isabs(rel) \
                else os.path.join(root, rel)

        apps = doc.get("apps")
        if not apps:
            raise ManifestError("manifest lists no apps")
        entries = []
        seen_ids = set()
        for item in apps:
            app_id = item.get("app_id")
            if not app_id:
                raise ManifestError("manifest entry missing app_id")
            if app_id in seen_ids:
                raise ManifestError(f"duplicate app_id {app_id!r}")
            seen_ids.add(app_id)
            entries.append(ManifestEntry(
                app_id=app_id,
                trace_path=resolve(item["trace"]),
                metadata_path=resolve(item["metadata"]),
            ))
        manifest = cls(
            root=root,
            entries=entries,
            ad_list_path=resolve(doc.get("ad_list")),
            tracker_list_path=resolve(doc.get("tracker_list")),
            baseline_path=resolve(doc.get("baseline")),
            suffix_list_path=resolve(doc.get("suffix_list")),
            reputation_fixtures=resolve(doc.get("reputation_fixtures")),
            cache_path=resolve(doc.get("cache")),
        )
        manifest.validate()
        return manifest

    def validate(self):
        required = [self.ad_list_path, self.tracker_list_path]
        for entry in self.entries:
            required.extend([entry.trace_path, entry.metadata_path])
        for optional in (self.baseline_path, self.suffix_list_path,
                         self.reputation_fixtures):
            if optional is not None:
                required.append(optional)
        for path in required:
            if path is None:
                raise ManifestError("manifest missing a required path")
            if not os.path.exists(path):
                raise ManifestError(f"referenced file does not exist: {path}")


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _bundled_suffix_hash() -> str:
    data = (importlib.resources.files("netlens") / "data" / BUNDLED_SNAPSHOT)
    return hashlib.sha256(data.read_bytes()).hexdigest()


def load_metadata(path) -> AppMetadata:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return AppMetadata(
        name=doc.get("name") or "",
        category=doc.get("category") or UNKNOWN_CATEGORY,
        rating=doc.get("rating"),
        downloads=doc.get("downloads"),
        top_developer=bool(doc.get("top_developer", False)),
    )


def load_filter_file(path) -> FilterSet:
    with open(path, encoding="utf-8", errors="replace") as fh:
        lines = fh.read().splitlines()
    return compile_filters(lines, source_hash=_sha256_file(path))


def _parse_trace(path, ports):
    if path.endswith((".pcap", ".cap")):
        return parse_pcap(path, ports=ports)
    return parse_urllog(path)


def _cdf_points(values) -> list:
    values = sorted(values)
    n = len(values)
    points = []
    for i, v in enumerate(values, start=1):
        if points and points[-1][0] == v:
            points[-1][1] = i / n
        else:
            points.append([v, i / n])
    return [[v, frac] for v, frac in points]


def run_analyze(manifest: CorpusManifest, config: ScoringConfig,
                offline: bool = True, ports=frozenset({80}), jobs: int = 1,
                provider=None, live_endpoints=None,
                rate_limit: float | None = None) -> dict:
    """Run the full pipeline and return the report bundle (a JSON-able dict).

    Per-app ingest failures are recorded and skipped; a wholly failed
    corpus raises ManifestError.
    """
    ad_set = load_filter_file(manifest.ad_list_path)
    tracker_set = load_filter_file(manifest.tracker_list_path)
    if manifest.suffix_list_path:
        psl = PublicSuffixList.from_file(manifest.suffix_list_path)
        suffix_hash = _sha256_file(manifest.suffix_list_path)
    else:
        psl = bundled_psl()
        suffix_hash = _bundled_suffix_hash()

    baseline_urls: set = set()
    if manifest.baseline_path:
        baseline_urls = {r.full_url
                         for r in _parse_trace(manifest.baseline_path, ports)}

    if provider is None:
        if offline:
            if not manifest.reputation_fixtures:
                raise ManifestError(
                    "offline analysis requires reputation_fixtures")
            provider = FixtureBackend(manifest.reputation_fixtures)
        else:
            endpoints = live_endpoints or {}
            provider = HttpBackend(
                url_endpoint=endpoints.get("url_endpoint"),
                domain_endpoint=endpoints.get("domain_endpoint"),
            )
    cache = ReputationCache(manifest.cache_path)

    failed: dict[str, str] = {}
    per_app_requests: dict[str, list] = {}
    metadata: dict[str, AppMetadata] = {}
    total_requests = 0
    requests_post_baseline = 0

    def ingest(entry: ManifestEntry):
        meta = load_metadata(entry.metadata_path)
        requests = _parse_trace(entry.trace_path, ports)
        return entry.app_id, meta, requests

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = {pool.submit(ingest, e): e for e in manifest.entries}
        for future, entry in futures.items():
            try:
                app_id, meta, requests = future.result()
            except Exception as exc:  # noqa: BLE001 - per-app isolation
                log.error("app %s failed: %s", entry.app_id, exc)
                failed[entry.app_id] = str(exc)
                continue
            total_requests += len(requests)
            kept = filter_baseline(requests, baseline_urls)
            requests_post_baseline += len(kept)
            per_app_requests[app_id] = kept
            metadata[app_id] = meta

    if not per_app_requests and failed:
        raise ManifestError(
            f"every app in the corpus failed: {sorted(failed)}")

    # distinct-URL semantics: multiplicity collapses on exact full_url
    classifications: dict[str, object] = {}
    per_app_urls: dict[str, list] = {}
    for app_id, requests in sorted(per_app_requests.items()):
        urls = sorted({r.full_url for r in requests})
        per_app_urls[app_id] = urls
        for url in urls:
            if url not in classifications:
                classifications[url] = classify_url(
                    url, ad_set, tracker_set, suffix_list=psl)

    effective_rate = 0 if offline else (rate_limit or DEFAULT_RATE_LIMIT)
    all_urls = sorted(classifications)
    url_reports = lookup_or_query(all_urls, cache, provider,
                                  rate_limit=effective_rate)
    all_domains = sorted({c.registrable_domain
                          for c in classifications.values()})
    domain_reports = lookup_or_query_domains(
        all_domains, cache, provider, rate_limit=effective_rate)

    profiles = {}
    for app_id, urls in sorted(per_app_urls.items()):
        profiles[app_id] = build_profile(
            app_id=app_id,
            metadata=metadata[app_id],
            urls=urls,
            classifications={u: classifications[u] for u in urls},
            reports={u: url_reports[u] for u in urls},
            config=config,
            suffix_list=psl,
        )

    bundle = build_bundle(
        profiles=profiles,
        classifications=classifications,
        url_reports=url_reports,
        domain_reports=domain_reports,
        config=config,
        failed=failed,
        provenance={
            "tool": "netlens",
            "version": __version__,
            "ad_list_sha256": ad_set.source_hash,
            "tracker_list_sha256": tracker_set.source_hash,
            "suffix_list_sha256": suffix_hash,
            "offline": offline,
        },
        totals={
            "total_requests": total_requests,
            "requests_post_baseline": requests_post_baseline,
        },
        psl=psl,
    )
    return bundle


def build_bundle(profiles, classifications, url_reports, domain_reports,
                 config, failed, provenance, totals, psl) -> dict:
    all_urls = sorted(classifications)
    active = {a: p for a, p in profiles.items() if p.counts["distinct_urls"]}
    n_active = len(active)

    # domain-level category rollup by FQDN majority vote
    fqdns_by_domain: dict[str, set] = {}
    url_counts_by_fqdn: dict[str, int] = {}
    for cls in classifications.values():
        fqdns_by_domain.setdefault(cls.registrable_domain, set()).add(cls.fqdn)
        url_counts_by_fqdn[cls.fqdn] = url_counts_by_fqdn.get(cls.fqdn, 0) + 1
    domain_categories: dict[str, str] = {}
    for domain, fqdns in sorted(fqdns_by_domain.items()):
        report = domain_reports.get(domain)
        fqdn_cats = {f: (report.categories.get(f) if report else None)
                     for f in fqdns}
        assignment = majority_category(fqdn_cats, domain,
                                       url_counts=url_counts_by_fqdn)
        domain_categories[domain] = assignment.category

    # per-class URL groupings over the global distinct URL set
    ad_urls = [u for u in all_urls
               if classifications[u].url_class is UrlClass.AD]
    tracker_urls = [u for u in all_urls
                    if classifications[u].url_class is UrlClass.TRACKER]

    def domain_share_table(urls):
        counts: dict[str, int] = {}
        for u in urls:
            d = classifications[u].registrable_domain
            counts[d] = counts.get(d, 0) + 1
        total = len(urls)
        rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [[d, c, c / total if total else 0.0] for d, c in rows]

    domain_popularity = []
    if n_active:
        app_counts: dict[str, int] = {}
        for profile in active.values():
            for domain in profile.domains():
                app_counts[domain] = app_counts.get(domain, 0) + 1
        domain_popularity = [
            [d, c / n_active]
            for d, c in sorted(app_counts.items(),
                               key=lambda kv: (-kv[1], kv[0]))]

    n_domains = len(fqdns_by_domain)
    cat_counts: dict[str, int] = {}
    for domain, category in domain_categories.items():
        cat_counts[category] = cat_counts.get(category, 0) + 1
    domain_category_popularity = [
        [cat, count, count / n_domains if n_domains else 0.0]
        for cat, count in sorted(cat_counts.items(),
                                 key=lambda kv: (-kv[1], kv[0]))]

    known_domain_reports = [r for r in domain_reports.values()
                            if r.status == STATUS_OK]
    safety_histogram = (domain_safety_histogram(known_domain_reports)
                        if known_domain_reports else None)

    malicious_fraction: dict[str, float] = {}
    by_category: dict[str, list] = {}
    for domain, category in domain_categories.items():
        report = domain_reports.get(domain)
        if report is not None and report.status == STATUS_OK:
            by_category.setdefault(category, []).append(report)
    for category, reports in sorted(by_category.items()):
        bad = sum(1 for r in reports if r.safety_verdict == "malicious")
        malicious_fraction[category] = bad / len(reports)

    top_apps = {axis: [[name, value] for name, value in
                       rank_apps(profiles.values(), axis, TOP_N)]
                for axis in RANK_AXES}

    url_dist_by_cat: dict[str, dict] = {}
    values_by_cat: dict[str, list] = {}
    for profile in active.values():
        values_by_cat.setdefault(profile.metadata.category, []).append(
            profile.counts["distinct_urls"])
    for category, values in sorted(values_by_cat.items()):
        url_dist_by_cat[category] = distribution_summary(values)

    cdf = {}
    if active:
        for key, metric in (("urls", "distinct_urls"),
                            ("domains", "distinct_domains"),
                            ("ad_urls", "ad_urls"),
                            ("tracker_urls", "tracker_urls")):
            cdf[key] = _cdf_points(
                [p.counts[metric] for p in active.values()])

    profile_docs = {}
    for app_id, profile in sorted(profiles.items()):
        url_docs = []
        for url in sorted(profile.urls):
            cls = profile.classifications[url]
            report = profile.reports.get(url)
            url_docs.append({
                "url": url,
                "class": cls.url_class.value,
                "rule": cls.matched_rule,
                "fqdn": cls.fqdn,
                "domain": cls.registrable_domain,
                "positives": (report.positives
                              if report and report.status == STATUS_OK
                              else None),
            })
        meta = profile.metadata
        profile_docs[app_id] = {
            "name": meta.name,
            "category": meta.category,
            "rating": meta.rating,
            "downloads": meta.downloads,
            "top_developer": meta.top_developer,
            "counts": dict(sorted(profile.counts.items())),
            "suspicion_score": profile.suspicion_score,
            "urls": url_docs,
        }

    return {
        "provenance": {
            **provenance,
            "config": {
                "alpha": config.alpha,
                "beta": config.beta,
                "whitelist": sorted(config.whitelist),
                "positives_threshold": config.positives_threshold,
            },
        },
        "corpus": {
            "apps": len(profiles) + len(failed),
            "active_apps": n_active,
            "failed_apps": dict(sorted(failed.items())),
            "total_requests": totals["total_requests"],
            "requests_post_baseline": totals["requests_post_baseline"],
            "distinct_urls_global": len(all_urls),
            "distinct_domains_global": n_domains,
        },
        "profiles": profile_docs,
        "top_apps": top_apps,
        "domain_popularity": domain_popularity[:TOP_DOMAINS],
        "ad_domain_popularity": domain_share_table(ad_urls)[:TOP_DOMAINS],
        "tracker_domain_popularity":
            domain_share_table(tracker_urls)[:TOP_DOMAINS],
        "domain_categories": domain_categories,
        "domain_category_popularity": domain_category_popularity,
        "safety_histogram": safety_histogram,
        "malicious_fraction_by_category": malicious_fraction,
        "category_matrix": category_matrix(active.values(), domain_categories),
        "url_count_distribution_by_app_category": url_dist_by_cat,
        "cdf": cdf,
    }


def _fmt_fraction(x) -> str:
    return f"{x:.3f}"


def _fmt_percent(x) -> str:
    return f"{x:.1f}"


_TABLE_KEYS = (
    "domain_popularity", "ad_domain_popularity", "tracker_domain_popularity",
    "domain_category_popularity",
)


def emit_report(bundle: dict, fmt: str, out_dir) -> list:
    """Write report files for one format; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def write_text(name, text):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(path)

    if fmt == "json":
        write_text("bundle.json",
                   json.dumps(bundle, indent=2, sort_keys=True) + "\n")
        tables_dir = os.path.join(out_dir, "tables")
        os.makedirs(tables_dir, exist_ok=True)
        for key in (*_TABLE_KEYS, "top_apps", "safety_histogram",
                    "malicious_fraction_by_category", "category_matrix",
                    "url_count_distribution_by_app_category", "cdf"):
            path = os.path.join(tables_dir, f"{key}.json")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(bundle[key], fh, indent=2, sort_keys=True)
                fh.write("\n")
            written.append(path)
    elif fmt == "csv":
        tables_dir = os.path.join(out_dir, "tables")
        os.makedirs(tables_dir, exist_ok=True)
        written.extend(_emit_csv(bundle, tables_dir))
    elif fmt == "text":
        write_text("summary.txt", render_text_summary(bundle))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return written


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _emit_csv(bundle, tables_dir) -> list:
    written = []

    def emit(name, header, rows):
        path = os.path.join(tables_dir, f"{name}.csv")
        _write_csv(path, header, rows)
        written.append(path)

    emit("domain_popularity", ["domain", "fraction_of_apps"],
         [[d, _fmt_fraction(f)] for d, f in bundle["domain_popularity"]])
    for key in ("ad_domain_popularity", "tracker_domain_popularity"):
        emit(key, ["domain", "urls", "share_percent"],
             [[d, c, _fmt_percent(100 * share)]
              for d, c, share in bundle[key]])
    emit("domain_category_popularity", ["category", "domains", "fraction"],
         [[c, n, _fmt_fraction(f)]
          for c, n, f in bundle["domain_category_popularity"]])
    for axis, rows in sorted(bundle["top_apps"].items()):
        emit(f"top_apps_{axis}", ["app", "value"],
             [[name, value] for name, value in rows])
    if bundle["safety_histogram"] is not None:
        emit("safety_histogram", ["verdict", "fraction"],
             [[v, _fmt_fraction(f)]
              for v, f in sorted(bundle["safety_histogram"].items())])
    emit("malicious_fraction_by_category", ["category", "fraction_malicious"],
         [[c, _fmt_fraction(f)]
          for c, f in sorted(bundle["malicious_fraction_by_category"].items())])
    matrix = bundle["category_matrix"]
    dom_cats = sorted({c for row in matrix.values() for c in row})
    emit("category_matrix", ["app_category", *dom_cats],
         [[app_cat, *[_fmt_percent(row.get(c, 0.0)) for c in dom_cats]]
          for app_cat, row in sorted(matrix.items())])
    return written


def render_text_summary(bundle) -> str:
    lines = []
    corpus = bundle["corpus"]
    prov = bundle["provenance"]
    lines.append("netlens report")
    lines.append("=" * 40)
    lines.append(f"apps: {corpus['apps']}  active: {corpus['active_apps']}  "
                 f"failed: {len(corpus['failed_apps'])}")
    lines.append(f"requests: {corpus['total_requests']} "
                 f"(post-baseline {corpus['requests_post_baseline']})")
    lines.append(f"distinct URLs: {corpus['distinct_urls_global']}  "
                 f"distinct domains: {corpus['distinct_domains_global']}")
    lines.append(f"ad list sha256: {prov['ad_list_sha256']}")
    lines.append(f"tracker list sha256: {prov['tracker_list_sha256']}")
    lines.append(f"suffix list sha256: {prov['suffix_list_sha256']}")
    lines.append("")
    for axis in RANK_AXES:
        lines.append(f"top apps {axis}")
        lines.append("-" * 40)
        for name, value in bundle["top_apps"][axis]:
            if axis == "by_suspicion":
                lines.append(f"  {name:<28} {value:.3f}")
            else:
                lines.append(f"  {name:<28} {value:g}")
        lines.append("")
    lines.append("popular domains (fraction of apps)")
    lines.append("-" * 40)
    for domain, fraction in bundle["domain_popularity"]:
        lines.append(f"  {domain:<28} {_fmt_fraction(fraction)}")
    lines.append("")
    for key, title in (("ad_domain_popularity", "top ad domains"),
                       ("tracker_domain_popularity", "top tracker domains")):
        lines.append(f"{title} (urls, share)")
        lines.append("-" * 40)
        for domain, count, share in bundle[key]:
            lines.append(f"  {domain:<28} {count:>6} "
                         f"({_fmt_percent(100 * share)}%)")
        lines.append("")
    if bundle["safety_histogram"] is not None:
        lines.append("domain safety verdicts")
        lines.append("-" * 40)
        for verdict, fraction in sorted(bundle["safety_histogram"].items()):
            lines.append(f"  {verdict:<12} {_fmt_percent(100 * fraction)}%")
        lines.append("")
    return "\n".join(lines) + "\n"
