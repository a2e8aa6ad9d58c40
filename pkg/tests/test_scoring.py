"""Scoring tests: score formula, rankings, matrices, distributions."""

import random

import pytest

from netlens.classifier import UrlClass, UrlClassification
from netlens.http_model import AppMetadata
from netlens.reputation import UrlReport
from netlens.scoring import (
    AppProfile,
    ConfigError,
    ScoringConfig,
    build_profile,
    category_matrix,
    distribution_summary,
    rank_apps,
)


def make_classification(url, domain=None, url_class=UrlClass.OTHER):
    host = url[len("http://"):].split("/", 1)[0]
    return UrlClassification(
        url=url, url_class=url_class,
        matched_rule="rule" if url_class is not UrlClass.OTHER else None,
        fqdn=host, registrable_domain=domain or host)


def make_report(url, positives, total=52):
    return UrlReport(url=url,
                     engine_verdicts={f"e{i}": i < positives
                                      for i in range(total)},
                     positives=positives, total_engines=total,
                     retrieved_at=0.0)


def make_profile(spec, name="app", category="GAME", config=None):
    """spec: list of (url, domain, positives or None)."""
    urls = [u for u, _, _ in spec]
    classifications = {u: make_classification(u, d) for u, d, _ in spec}
    reports = {u: make_report(u, p) for u, _, p in spec if p is not None}
    return build_profile(
        app_id=name, metadata=AppMetadata(name=name, category=category),
        urls=urls, classifications=classifications, reports=reports,
        config=config or ScoringConfig())


def brute_force_score(triples, alpha, beta, whitelist):
    """Independent recomputation from raw (url, positives, domain)."""
    kept = [(u, p, d) for u, p, d in triples if d not in whitelist]
    flagged = [(u, p, d) for u, p, d in kept if p > 0]
    if not flagged:
        return 0.0
    total = sum(p ** alpha for _, p, _ in flagged)
    domains = len({d for _, _, d in flagged})
    return total * domains ** beta


class TestSuspicionScore:
    def test_no_flagged_urls_scores_zero(self):
        profile = make_profile([("http://a.com/x", "a.com", 0),
                                ("http://b.com/y", "b.com", None)])
        assert profile.suspicion_score == 0.0

    def test_two_urls_two_domains(self):
        profile = make_profile([("http://a.com/x", "a.com", 1),
                                ("http://b.com/y", "b.com", 2)])
        # (1**3 + 2**3) * 2**1
        assert profile.suspicion_score == pytest.approx(18.0)

    def test_whitelist_removes_domain(self):
        config = ScoringConfig(whitelist=frozenset({"b.com"}))
        profile = make_profile([("http://a.com/x", "a.com", 1),
                                ("http://b.com/y", "b.com", 2)],
                               config=config)
        # recomputed by hand after removing b.com: 1**3 * 1**1
        assert profile.suspicion_score == pytest.approx(1.0)

    def test_default_whitelist_normalizes_fqdn_entries(self):
        # api.airpush.com rolls up to airpush.com
        profile = make_profile(
            [("http://cdn.airpush.com/x", "airpush.com", 4)])
        assert profile.suspicion_score == 0.0

    def test_alpha_beta_validation(self):
        with pytest.raises(ConfigError):
            ScoringConfig(alpha=0.5)
        with pytest.raises(ConfigError):
            ScoringConfig(beta=0.0)

    def test_unknown_reports_contribute_zero(self):
        profile = make_profile([("http://a.com/x", "a.com", None)])
        assert profile.suspicion_score == 0.0

    def test_matches_brute_force_on_random_profiles(self):
        rng = random.Random(1234)
        whitelist = {"white.com"}
        config = ScoringConfig(alpha=3, beta=1,
                               whitelist=frozenset(whitelist))
        for _ in range(60):
            triples = []
            for i in range(rng.randint(0, 15)):
                domain = rng.choice(["a.com", "b.com", "c.net", "white.com"])
                positives = rng.choice([0, 0, 0, 1, 2, 3, 7])
                triples.append((f"http://{domain}/u{i}", positives, domain))
            profile = make_profile(
                [(u, d, p) for u, p, d in triples], config=config)
            expected = brute_force_score(triples, 3, 1, whitelist)
            assert profile.suspicion_score == pytest.approx(expected, rel=1e-9)

    def test_monotonicity_properties(self):
        rng = random.Random(77)
        config = ScoringConfig()
        for _ in range(200):
            spec = [(f"http://d{i}.com/u", f"d{i}.com",
                     rng.choice([0, 1, 2, 5]))
                    for i in range(rng.randint(1, 6))]
            base = make_profile(spec, config=config).suspicion_score
            # adding a flagged URL on a new domain never decreases
            grown = make_profile(
                spec + [("http://new.org/u", "new.org", 3)],
                config=config).suspicion_score
            assert grown >= base
            # increasing any p never decreases
            idx = rng.randrange(len(spec))
            url, dom, p = spec[idx]
            bumped = list(spec)
            bumped[idx] = (url, dom, p + 1)
            assert make_profile(bumped, config=config).suspicion_score >= base
            # adding a whitelisted-domain URL never changes the score
            extra = make_profile(
                spec + [("http://sub.xiti.com/u", "xiti.com", 9)],
                config=config).suspicion_score
            assert extra == pytest.approx(base)

    def test_counts_recomputable(self):
        profile = make_profile([("http://a.com/x", "a.com", 1),
                                ("http://b.com/y", "b.com", 0)])
        assert profile.counts == AppProfile.compute_counts(
            profile.urls, profile.classifications)


class TestRankApps:
    def _profiles(self, spec):
        out = []
        for name, ad_count in spec.items():
            urls = [(f"http://ads{i}.example-{name}.com/a",
                     f"example-{name}.com", 0) for i in range(ad_count)]
            profile = make_profile(urls, name=name)
            for u in profile.urls:
                profile.classifications[u] = make_classification(
                    u, profile.classifications[u].registrable_domain,
                    UrlClass.AD)
            profile.counts = AppProfile.compute_counts(
                profile.urls, profile.classifications)
            out.append(profile)
        return out

    def test_descending_sort(self):
        ranked = rank_apps(self._profiles({"a": 5, "b": 7}), "by_ad_urls", 10)
        assert ranked == [("b", 7), ("a", 5)]

    def test_tie_breaks_by_name(self):
        ranked = rank_apps(self._profiles({"b": 5, "a": 5}), "by_ad_urls", 10)
        assert ranked == [("a", 5), ("b", 5)]

    def test_truncates_to_n(self):
        ranked = rank_apps(self._profiles({"a": 1, "b": 2, "c": 3}),
                           "by_ad_urls", 2)
        assert len(ranked) == 2

    def test_unknown_axis_rejected(self):
        with pytest.raises(ValueError):
            rank_apps([], "by_magic", 5)

    def test_suspicion_ordering_matches_independent_computation(self):
        # three-app corpus recomputed independently (spreadsheet-style)
        apps = {
            "alpha": [("http://a.com/1", "a.com", 2),
                      ("http://b.com/2", "b.com", 1)],   # (8+1)*2 = 18
            "beta": [("http://c.com/1", "c.com", 3)],     # 27*1 = 27
            "gamma": [("http://d.com/1", "d.com", 0)],    # 0
        }
        profiles = [make_profile(spec, name=name)
                    for name, spec in apps.items()]
        ranked = rank_apps(profiles, "by_suspicion", 3)
        assert [name for name, _ in ranked] == ["beta", "alpha", "gamma"]
        assert ranked[0][1] == pytest.approx(27.0)
        assert ranked[1][1] == pytest.approx(18.0)

    def test_scale_invariance_of_ordering(self):
        rng = random.Random(9)
        profiles = [make_profile(
            [(f"http://d{i}{j}.com/u", f"d{i}{j}.com", rng.choice([0, 1, 3]))
             for j in range(3)], name=f"app{i}") for i in range(6)]
        base_order = [n for n, _ in rank_apps(profiles, "by_suspicion", 6)]
        for profile in profiles:
            profile.suspicion_score *= 7.5
        assert [n for n, _ in rank_apps(profiles, "by_suspicion", 6)] \
            == base_order


class TestCategoryMatrix:
    def test_single_app_even_split(self):
        profile = make_profile([("http://a1.com/x", "a1.com", None),
                                ("http://a2.com/x", "a2.com", None),
                                ("http://i1.com/x", "i1.com", None),
                                ("http://i2.com/x", "i2.com", None)])
        matrix = category_matrix([profile], {
            "a1.com": "ads", "a2.com": "ads", "i1.com": "IT", "i2.com": "IT"})
        assert matrix["GAME"] == {"IT": 50.0, "ads": 50.0}

    def test_two_apps_same_category(self):
        p1 = make_profile([("http://a1.com/x", "a1.com", None)], name="p1")
        p2 = make_profile([("http://a2.com/x", "a2.com", None)], name="p2")
        matrix = category_matrix([p1, p2], {"a1.com": "ads", "a2.com": "ads"})
        assert matrix["GAME"] == {"ads": 100.0}

    def test_zero_domain_category_absent(self):
        empty = make_profile([], name="empty", category="WEATHER")
        full = make_profile([("http://a.com/x", "a.com", None)], name="full")
        matrix = category_matrix([empty, full], {"a.com": "ads"})
        assert "WEATHER" not in matrix
        assert "GAME" in matrix

    def test_rows_sum_to_100(self):
        rng = random.Random(31)
        cats = ["GAME", "TOOLS", "SOCIAL", "FINANCE"]
        dom_cats = ["ads", "IT", "news", "uncategorized", "shopping"]
        domain_categories = {}
        profiles = []
        for i in range(12):
            spec = []
            for j in range(rng.randint(1, 9)):
                domain = f"d{rng.randint(0, 30)}.com"
                domain_categories.setdefault(domain, rng.choice(dom_cats))
                spec.append((f"http://{domain}/u{j}", domain, None))
            profiles.append(make_profile(spec, name=f"app{i}",
                                         category=rng.choice(cats)))
        matrix = category_matrix(profiles, domain_categories)
        assert matrix
        for row in matrix.values():
            assert sum(row.values()) == pytest.approx(100.0, abs=1e-6)


class TestDistributionSummary:
    def test_odd_length_exact(self):
        summary = distribution_summary([1, 2, 3, 4, 5])
        assert summary["median"] == 3
        assert summary["q1"] == 2
        assert summary["q3"] == 4

    def test_single_value(self):
        summary = distribution_summary([4])
        assert [summary[k] for k in ("min", "q1", "median", "q3", "max")] \
            == [4.0] * 5
        assert summary["outliers"] == []

    def test_outlier_fences(self):
        # q1=q3=1, IQR=0, fences at 1: 100 lies outside
        summary = distribution_summary([1, 1, 1, 1, 100])
        assert summary["outliers"] == [100]

    def test_linear_interpolation(self):
        # [1,2,3,4]: q1 at h=0.75 -> 1.75; q3 at h=2.25 -> 3.25
        summary = distribution_summary([4, 2, 1, 3])
        assert summary["q1"] == pytest.approx(1.75)
        assert summary["q3"] == pytest.approx(3.25)

    def test_matches_numpy_linear_method(self):
        numpy = pytest.importorskip("numpy")
        rng = random.Random(8)
        for _ in range(50):
            values = [rng.randint(0, 100) for _ in range(rng.randint(1, 40))]
            summary = distribution_summary(values)
            assert summary["q1"] == pytest.approx(
                float(numpy.percentile(values, 25)))
            assert summary["median"] == pytest.approx(
                float(numpy.percentile(values, 50)))
            assert summary["q3"] == pytest.approx(
                float(numpy.percentile(values, 75)))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            distribution_summary([])
