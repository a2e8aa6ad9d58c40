"""Command-line front end."""

from __future__ import annotations

import json
import sys

import click

from . import __version__
from .classifier import classify_url
from .psl import PublicSuffixList, bundled_psl
from .report import (
    CorpusManifest,
    ManifestError,
    emit_report,
    run_analyze,
)
from .scoring import DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_WHITELIST, ScoringConfig

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INVALID = 2


def _load_config(path) -> ScoringConfig:
    if not path:
        return ScoringConfig()
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return ScoringConfig(
        alpha=doc.get("alpha", DEFAULT_ALPHA),
        beta=doc.get("beta", DEFAULT_BETA),
        whitelist=frozenset(doc.get("whitelist", sorted(DEFAULT_WHITELIST))),
        positives_threshold=doc.get("positives_threshold", 0),
    )


def _parse_ports(text) -> frozenset:
    try:
        ports = frozenset(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise click.BadParameter(f"bad port list {text!r}")
    if not ports:
        raise click.BadParameter("port list is empty")
    return ports


def _load_filter_set(path):
    from .report import load_filter_file
    return load_filter_file(path)


@click.group()
@click.version_option(__version__)
def main():
    """Characterize mobile-app network behavior from captured HTTP traffic."""


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True),
              help="Corpus manifest JSON.")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="Scoring config JSON (alpha, beta, whitelist).")
@click.option("--format", "formats", multiple=True,
              type=click.Choice(["json", "csv", "text"]), default=("json",),
              show_default=True)
@click.option("--offline/--live", default=True, show_default=True,
              help="Use the bundled reputation fixtures instead of the network.")
@click.option("--ports", default="80", show_default=True,
              help="Comma-separated TCP ports treated as HTTP.")
@click.option("--baseline", type=click.Path(exists=True),
              help="Override the manifest's baseline trace.")
@click.option("--jobs", default=1, show_default=True,
              help="Parallel per-app ingest workers.")
def analyze(corpus, out, config_path, formats, offline, ports, baseline, jobs):
    """Run the full pipeline over a corpus and emit reports."""
    try:
        manifest = CorpusManifest.load(corpus)
        if baseline:
            manifest.baseline_path = baseline
        config = _load_config(config_path)
        bundle = run_analyze(manifest, config, offline=offline,
                             ports=_parse_ports(ports), jobs=jobs)
    except (ManifestError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID)
    for fmt in formats:
        emit_report(bundle, fmt, out)
    failed = bundle["corpus"]["failed_apps"]
    if failed:
        click.echo(f"warning: {len(failed)} app(s) failed: "
                   f"{', '.join(sorted(failed))}", err=True)
        sys.exit(EXIT_PARTIAL)


@main.command()
@click.argument("url")
@click.option("--list", "list_path", required=True, type=click.Path(exists=True),
              help="Filter list file (Adblock syntax).")
@click.option("--origin", help="Origin registrable domain for $domain options.")
def match(url, list_path, origin):
    """One-shot filter check of URL against a filter list."""
    filter_set = _load_filter_set(list_path)
    try:
        result = filter_set.match_url(url, origin_domain=origin)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID)
    if result.matched:
        click.echo(f"matched: {result.rule.raw}")
    elif result.exception is not None:
        click.echo(f"suppressed by exception: {result.exception.raw}")
    else:
        click.echo("no match")


@main.command()
@click.argument("url")
@click.option("--ad-list", required=True, type=click.Path(exists=True))
@click.option("--tracker-list", required=True, type=click.Path(exists=True))
@click.option("--suffix-list", type=click.Path(exists=True))
def classify(url, ad_list, tracker_list, suffix_list):
    """Classify URL as ad / tracker / other."""
    psl = PublicSuffixList.from_file(suffix_list) if suffix_list \
        else bundled_psl()
    try:
        cls = classify_url(url, _load_filter_set(ad_list),
                           _load_filter_set(tracker_list), suffix_list=psl)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID)
    click.echo(json.dumps({
        "url": cls.url,
        "class": cls.url_class.value,
        "rule": cls.matched_rule,
        "fqdn": cls.fqdn,
        "registrable_domain": cls.registrable_domain,
    }, indent=2))


@main.command()
@click.argument("app_id")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--offline/--live", default=True)
@click.option("--ports", default="80")
def score(app_id, corpus, config_path, offline, ports):
    """Compute one app's suspicion score."""
    try:
        manifest = CorpusManifest.load(corpus)
        manifest.entries = [e for e in manifest.entries if e.app_id == app_id]
        if not manifest.entries:
            raise ManifestError(f"app {app_id!r} not in corpus")
        config = _load_config(config_path)
        bundle = run_analyze(manifest, config, offline=offline,
                             ports=_parse_ports(ports))
    except (ManifestError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID)
    profile = bundle["profiles"][app_id]
    click.echo(json.dumps({
        "app_id": app_id,
        "suspicion_score": profile["suspicion_score"],
        "counts": profile["counts"],
    }, indent=2))


@main.command("fetch-reputation")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--offline/--live", default=True)
@click.option("--ports", default="80")
def fetch_reputation(corpus, offline, ports):
    """Warm the reputation cache for every URL in the corpus."""
    try:
        manifest = CorpusManifest.load(corpus)
        if offline and not manifest.reputation_fixtures:
            raise ManifestError("offline fetch requires reputation_fixtures")
        bundle = run_analyze(manifest, ScoringConfig(), offline=offline,
                             ports=_parse_ports(ports))
    except (ManifestError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID)
    click.echo(f"cached reports for "
               f"{bundle['corpus']['distinct_urls_global']} URLs and "
               f"{bundle['corpus']['distinct_domains_global']} domains")


@main.command()
@click.option("--bundle", "bundle_path", required=True,
              type=click.Path(exists=True), help="A saved bundle.json.")
@click.option("--format", "formats", multiple=True,
              type=click.Choice(["json", "csv", "text"]), default=("text",),
              show_default=True)
@click.option("--out", required=True, type=click.Path())
def report(bundle_path, formats, out):
    """Re-emit report tables from a saved bundle."""
    try:
        with open(bundle_path, encoding="utf-8") as fh:
            bundle = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID)
    for fmt in formats:
        emit_report(bundle, fmt, out)


if __name__ == "__main__":
    main()
