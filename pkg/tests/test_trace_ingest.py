"""Ingest tests: pcap reconstruction, url-log parsing, baseline filtering."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netlens.http_model import UNKNOWN_ENDPOINT, HttpRequest
from netlens.pcap import PcapFormatError, parse_pcap_with_stats
from netlens.trace_ingest import (
    filter_baseline,
    parse_pcap,
    parse_urllog,
    parse_urllog_with_stats,
    write_urllog,
)

import pcapgen


class TestParsePcap:
    def test_three_requests_three_hosts(self, tmp_path):
        pcap = pcapgen.simple_http_pcap([
            ("a.example.com", "/one"),
            ("b.example.com", "/two?x=1"),
            ("c.example.com", "/three"),
        ])
        path = tmp_path / "three.pcap"
        path.write_bytes(pcap)
        requests = parse_pcap(path.as_posix())
        assert [r.host for r in requests] == \
            ["a.example.com", "b.example.com", "c.example.com"]
        assert requests[1].full_url == "http://b.example.com/two?x=1"

    def test_empty_pcap(self, tmp_path):
        path = tmp_path / "empty.pcap"
        path.write_bytes(pcapgen.build_pcap([]))
        assert parse_pcap(path.as_posix()) == []

    def test_tls_only_traffic_yields_nothing(self, tmp_path):
        path = tmp_path / "tls.pcap"
        path.write_bytes(pcapgen.tls_only_pcap())
        assert parse_pcap(path.as_posix(), ports=frozenset({80, 443})) == []
        assert parse_pcap(path.as_posix()) == []

    def test_malformed_header_raises_format_error(self, tmp_path):
        path = tmp_path / "bad.pcap"
        path.write_bytes(b"\x00" * 30)
        with pytest.raises(PcapFormatError):
            parse_pcap(path.as_posix())

    def test_missing_file_raises_oserror(self, tmp_path):
        with pytest.raises(OSError):
            parse_pcap((tmp_path / "nope.pcap").as_posix())

    def test_malformed_packet_skipped_not_fatal(self, tmp_path):
        flow = pcapgen.FlowWriter()
        flow.segment(1.0, pcapgen.http_request_bytes("ok.com", "/"))
        records = [(0.5, b"\x00\x01\x02"), *flow.records]
        path = tmp_path / "mixed.pcap"
        path.write_bytes(pcapgen.build_pcap(records))
        requests, stats = parse_pcap_with_stats(path.as_posix())
        assert [r.host for r in requests] == ["ok.com"]
        assert stats.skipped_packets == 1

    @pytest.mark.parametrize("magic_nsec,big_endian", [
        (False, False), (True, False), (False, True), (True, True)])
    def test_pcap_variants(self, tmp_path, magic_nsec, big_endian):
        pcap = pcapgen.simple_http_pcap([("h.example", "/p")],
                                        magic_nsec=magic_nsec,
                                        big_endian=big_endian)
        path = tmp_path / "v.pcap"
        path.write_bytes(pcap)
        requests = parse_pcap(path.as_posix())
        assert [r.full_url for r in requests] == ["http://h.example/p"]

    def test_raw_ip_linktype(self, tmp_path):
        flow = pcapgen.FlowWriter(linktype=pcapgen.LINKTYPE_RAW)
        flow.segment(1.0, pcapgen.http_request_bytes("raw.example", "/r"))
        path = tmp_path / "raw.pcap"
        path.write_bytes(pcapgen.build_pcap(flow.records,
                                            linktype=pcapgen.LINKTYPE_RAW))
        assert [r.host for r in parse_pcap(path.as_posix())] == ["raw.example"]

    def test_pipelined_requests_one_segment(self, tmp_path):
        payload = pcapgen.http_request_bytes("p.example", "/first") \
            + pcapgen.http_request_bytes("p.example", "/second")
        flow = pcapgen.FlowWriter()
        flow.syn(1.0)
        flow.segment(1.1, payload)
        path = tmp_path / "pipe.pcap"
        path.write_bytes(pcapgen.build_pcap(flow.records))
        requests = parse_pcap(path.as_posix())
        assert [r.path_and_query for r in requests] == ["/first", "/second"]

    def test_request_split_across_segments(self, tmp_path):
        flow = pcapgen.FlowWriter()
        flow.syn(1.0)
        flow.send(1.1, pcapgen.http_request_bytes("s.example", "/split"),
                  chunk=10)
        path = tmp_path / "split.pcap"
        path.write_bytes(pcapgen.build_pcap(flow.records))
        assert [r.path_and_query for r in parse_pcap(path.as_posix())] \
            == ["/split"]

    def test_retransmission_not_duplicated(self, tmp_path):
        flow = pcapgen.FlowWriter()
        flow.syn(1.0)
        data = pcapgen.http_request_bytes("r.example", "/once")
        seq = flow.segment(1.1, data)
        flow.segment(1.2, data, seq=seq, advance=False)  # full retransmit
        path = tmp_path / "retx.pcap"
        path.write_bytes(pcapgen.build_pcap(flow.records))
        assert len(parse_pcap(path.as_posix())) == 1

    def test_out_of_order_segments_reassembled(self, tmp_path):
        data = pcapgen.http_request_bytes("o.example", "/ooo")
        first, second = data[:16], data[16:]
        flow = pcapgen.FlowWriter()
        flow.syn(1.0)
        flow.segment(1.2, second, seq=flow.seq + 16, advance=False)
        flow.segment(1.3, first)
        path = tmp_path / "ooo.pcap"
        path.write_bytes(pcapgen.build_pcap(flow.records))
        assert [r.path_and_query for r in parse_pcap(path.as_posix())] \
            == ["/ooo"]

    def test_post_body_not_scanned_for_requests(self, tmp_path):
        body = b"GET /fake HTTP/1.1\r\nHost: fake.example\r\n\r\n"
        payload = pcapgen.http_request_bytes("b.example", "/form",
                                             method="POST", body=body) \
            + pcapgen.http_request_bytes("b.example", "/after")
        flow = pcapgen.FlowWriter()
        flow.segment(1.0, payload)
        path = tmp_path / "body.pcap"
        path.write_bytes(pcapgen.build_pcap(flow.records))
        assert [r.path_and_query for r in parse_pcap(path.as_posix())] \
            == ["/form", "/after"]

    def test_absolute_uri_overrides_host_header(self, tmp_path):
        head = (b"GET http://real.example/abs HTTP/1.1\r\n"
                b"Host: decoy.example\r\n\r\n")
        flow = pcapgen.FlowWriter()
        flow.segment(1.0, head)
        path = tmp_path / "abs.pcap"
        path.write_bytes(pcapgen.build_pcap(flow.records))
        requests = parse_pcap(path.as_posix())
        assert [r.host for r in requests] == ["real.example"]
        assert requests[0].path_and_query == "/abs"

    def test_port_filter(self, tmp_path):
        flow = pcapgen.FlowWriter(dport=8080)
        flow.segment(1.0, pcapgen.http_request_bytes("alt.example", "/x"))
        path = tmp_path / "alt.pcap"
        path.write_bytes(pcapgen.build_pcap(flow.records))
        assert parse_pcap(path.as_posix()) == []
        assert len(parse_pcap(path.as_posix(), ports=frozenset({8080}))) == 1

    @pytest.mark.parametrize("k", [1, 10, 200])
    def test_exact_recovery_of_k_requests(self, tmp_path, k):
        rng = random.Random(k)
        expected = []
        records = []
        for i in range(k):
            host = f"host{i % 17}.example.com"
            pq = f"/path{i}?i={i}"
            expected.append((host, pq))
            flow = pcapgen.FlowWriter(sport=30000 + i, start_seq=500 + i)
            flow.syn(10.0 + i)
            data = pcapgen.http_request_bytes(host, pq)
            style = rng.random()
            if style < 0.3:
                flow.send(10.5 + i, data, chunk=rng.randint(8, 32))
            elif style < 0.5:
                seq = flow.segment(10.5 + i, data)
                flow.segment(10.6 + i, data, seq=seq, advance=False)
            else:
                flow.segment(10.5 + i, data)
            records.extend(flow.records)
        path = tmp_path / f"k{k}.pcap"
        path.write_bytes(pcapgen.build_pcap(records))
        requests = parse_pcap(path.as_posix())
        assert len(requests) == k
        assert sorted((r.host, r.path_and_query) for r in requests) \
            == sorted(expected)


class TestUrlLog:
    def test_basic_line(self, tmp_path):
        path = tmp_path / "u.log"
        path.write_text("1404000000 GET http://example.com/a?b=1\n")
        (req,) = parse_urllog(path.as_posix())
        assert req.host == "example.com"
        assert req.path_and_query == "/a?b=1"
        assert req.method == "GET"
        assert req.timestamp == 1404000000.0
        assert req.src_endpoint == UNKNOWN_ENDPOINT

    def test_comments_only(self, tmp_path):
        path = tmp_path / "c.log"
        path.write_text("# one\n# two\n")
        assert parse_urllog(path.as_posix()) == []

    def test_uppercase_host_normalized(self, tmp_path):
        path = tmp_path / "up.log"
        path.write_text("1 GET http://EXAMPLE.com/\n")
        (req,) = parse_urllog(path.as_posix())
        assert req.host == "example.com"

    def test_default_port_elided(self, tmp_path):
        path = tmp_path / "p.log"
        path.write_text("1 GET http://example.com:80/x\n")
        (req,) = parse_urllog(path.as_posix())
        assert req.full_url == "http://example.com/x"

    def test_malformed_lines_counted(self, tmp_path):
        path = tmp_path / "m.log"
        path.write_text("nonsense\n"
                        "1 GET ftp://example.com/\n"
                        "x GET http://example.com/\n"
                        "2 GET http://ok.example/\n")
        requests, stats = parse_urllog_with_stats(path.as_posix())
        assert [r.host for r in requests] == ["ok.example"]
        assert stats.malformed == 3

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(OSError):
            parse_urllog((tmp_path / "missing.log").as_posix())

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(
        st.floats(min_value=0, max_value=2_000_000_000, allow_nan=False),
        st.sampled_from(["GET", "POST", "HEAD", "PUT"]),
        st.from_regex(r"[a-z][a-z0-9-]{0,10}(\.[a-z]{2,6}){1,3}",
                      fullmatch=True),
        st.from_regex(r"(/[a-zA-Z0-9._~-]{0,8}){1,4}(\?[a-zA-Z0-9=&]{1,12})?",
                      fullmatch=True),
    ), max_size=20))
    def test_roundtrip(self, tmp_path_factory, entries):
        requests = [
            HttpRequest(timestamp=ts, src_endpoint=UNKNOWN_ENDPOINT,
                        dst_endpoint=UNKNOWN_ENDPOINT, method=method,
                        host=host, path_and_query=pq)
            for ts, method, host, pq in entries
        ]
        path = tmp_path_factory.mktemp("rt") / "rt.log"
        write_urllog(requests, path.as_posix())
        assert parse_urllog(path.as_posix()) == requests


class TestFilterBaseline:
    def _req(self, host, path="/"):
        return HttpRequest(timestamp=1.0, src_endpoint=UNKNOWN_ENDPOINT,
                           dst_endpoint=UNKNOWN_ENDPOINT, method="GET",
                           host=host, path_and_query=path)

    def test_removes_baseline_urls(self):
        u1, u2 = self._req("a.com"), self._req("b.com")
        assert filter_baseline([u1, u2], {u2.full_url}) == [u1]

    def test_empty_baseline_is_identity(self):
        reqs = [self._req("a.com"), self._req("b.com")]
        assert filter_baseline(reqs, set()) == reqs

    def test_all_filtered(self):
        reqs = [self._req("a.com"), self._req("b.com")]
        assert filter_baseline(reqs, {r.full_url for r in reqs}) == []

    def test_output_is_subsequence(self):
        rng = random.Random(3)
        reqs = [self._req(f"h{rng.randint(0, 5)}.com", f"/{i}")
                for i in range(40)]
        baseline = {r.full_url for r in reqs if rng.random() < 0.5}
        kept = filter_baseline(reqs, baseline)
        it = iter(reqs)
        assert all(any(r == x for x in it) for r in kept)
