"""Classic-pcap reading and HTTP/1.x request reconstruction.

Supports the classic capture format (micro- and nanosecond magics, both
byte orders) with Ethernet(1) and RAW-IP(101) link types.  TCP payload is
reassembled in-order with a bounded reorder buffer; duplicate
retransmissions are dropped.  Only request lines and headers are parsed;
bodies are skipped via Content-Length.  TLS and other non-HTTP payloads
silently mark their flow as non-HTTP.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

from .http_model import HttpRequest, normalize_host

MAGIC_USEC = 0xA1B2C3D4
MAGIC_NSEC = 0xA1B23C4D

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101

REORDER_BUFFER_LIMIT = 64
MAX_HEADER_BYTES = 64 * 1024

_REQUEST_LINE_RE = re.compile(rb"^([A-Z]+) (\S+) HTTP/1\.[01]$")
_HOST_RE = re.compile(rb"^host:[ \t]*(\S+)[ \t]*$", re.IGNORECASE)
_CONTENT_LENGTH_RE = re.compile(rb"^content-length:[ \t]*(\d+)[ \t]*$",
                                re.IGNORECASE)


class PcapFormatError(Exception):
    """Raised for an unreadable or malformed pcap global header."""


@dataclass
class PcapStats:
    packets: int = 0
    skipped_packets: int = 0
    broken_flows: int = 0
    non_http_flows: int = 0
    requests: int = 0


@dataclass
class _Flow:
    src: str
    dst: str
    expected: int | None = None
    pending: dict = field(default_factory=dict)
    buf: bytes = b""
    base_ts: float = 0.0
    marks: list = field(default_factory=list)  # (offset-in-buf, ts)
    body_skip: int = 0
    dead: bool = False


def _read_global_header(data: bytes):
    if len(data) < 24:
        raise PcapFormatError("truncated pcap global header")
    magic = struct.unpack("<I", data[:4])[0]
    if magic == MAGIC_USEC:
        endian, frac_div = "<", 1e6
    elif magic == MAGIC_NSEC:
        endian, frac_div = "<", 1e9
    else:
        magic_be = struct.unpack(">I", data[:4])[0]
        if magic_be == MAGIC_USEC:
            endian, frac_div = ">", 1e6
        elif magic_be == MAGIC_NSEC:
            endian, frac_div = ">", 1e9
        else:
            raise PcapFormatError(f"unrecognized pcap magic {data[:4].hex()}")
    network = struct.unpack(endian + "I", data[20:24])[0]
    if network not in (LINKTYPE_ETHERNET, LINKTYPE_RAW):
        raise PcapFormatError(f"unsupported link type {network}")
    return endian, frac_div, network


def _ip_payload(frame: bytes, linktype: int) -> bytes | None:
    if linktype == LINKTYPE_ETHERNET:
        if len(frame) < 14:
            return None
        ethertype = struct.unpack(">H", frame[12:14])[0]
        offset = 14
        if ethertype == 0x8100:  # single 802.1Q tag
            if len(frame) < 18:
                return None
            ethertype = struct.unpack(">H", frame[16:18])[0]
            offset = 18
        if ethertype != 0x0800:
            return None
        return frame[offset:]
    return frame


def _parse_tcp(ip: bytes):
    """Return (src, dst, sport, dport, seq, flags, payload) or None."""
    if len(ip) < 20 or ip[0] >> 4 != 4:
        return None
    ihl = (ip[0] & 0x0F) * 4
    total_len = struct.unpack(">H", ip[2:4])[0]
    if ihl < 20 or total_len < ihl or len(ip) < total_len:
        return None
    if ip[9] != 6:
        return None
    frag = struct.unpack(">H", ip[6:8])[0]
    if frag & 0x3FFF:  # fragmented: MF set or nonzero offset
        return None
    src = ".".join(str(b) for b in ip[12:16])
    dst = ".".join(str(b) for b in ip[16:20])
    tcp = ip[ihl:total_len]
    if len(tcp) < 20:
        return None
    sport, dport = struct.unpack(">HH", tcp[:4])
    seq = struct.unpack(">I", tcp[4:8])[0]
    data_off = (tcp[12] >> 4) * 4
    if data_off < 20 or len(tcp) < data_off:
        return None
    flags = tcp[13]
    return src, dst, sport, dport, seq, flags, tcp[data_off:]


def _split_absolute_uri(target: str) -> tuple[str, str] | None:
    rest = target[len("http://"):]
    slash = len(rest)
    for i, ch in enumerate(rest):
        if ch in "/?":
            slash = i
            break
    hostport = rest[:slash]
    path = rest[slash:] or "/"
    if path.startswith("?"):
        path = "/" + path
    host = normalize_host(hostport)
    if not host:
        return None
    return host, path


class _HttpScanner:
    """Consumes one flow's in-order byte stream, yielding HttpRequests."""

    def __init__(self, flow: _Flow, out: list, stats: PcapStats):
        self.flow = flow
        self.out = out
        self.stats = stats

    def feed(self, payload: bytes, ts: float):
        flow = self.flow
        if flow.dead or not payload:
            return
        flow.marks.append((len(flow.buf), ts))
        flow.buf += payload
        self._scan()

    def _ts_at(self, offset: int) -> float:
        ts = self.flow.base_ts
        for off, mark_ts in self.flow.marks:
            if off <= offset:
                ts = mark_ts
            else:
                break
        return ts

    def _consume(self, n: int):
        flow = self.flow
        flow.buf = flow.buf[n:]
        carry = None
        new_marks = []
        for off, ts in flow.marks:
            if off <= n:
                carry = ts
            else:
                new_marks.append((off - n, ts))
        if carry is not None:
            new_marks.insert(0, (0, carry))
        flow.marks = new_marks
        if flow.marks:
            flow.base_ts = flow.marks[0][1]

    def _scan(self):
        flow = self.flow
        while True:
            if flow.body_skip:
                take = min(flow.body_skip, len(flow.buf))
                self._consume(take)
                flow.body_skip -= take
                if flow.body_skip:
                    return
            if not flow.buf:
                return
            end = flow.buf.find(b"\r\n\r\n")
            if end == -1:
                if len(flow.buf) > MAX_HEADER_BYTES:
                    self._kill()
                return
            if not self._emit(flow.buf[:end]):
                self._kill()
                return
            self._consume(end + 4)

    def _kill(self):
        flow = self.flow
        flow.dead = True
        flow.buf = b""
        flow.marks = []
        self.stats.non_http_flows += 1

    def _emit(self, header_block: bytes) -> bool:
        flow = self.flow
        lines = header_block.split(b"\r\n")
        m = _REQUEST_LINE_RE.match(lines[0])
        if not m:
            return False
        method = m.group(1).decode("ascii")
        target = m.group(2).decode("latin-1")
        host_header = None
        content_length = 0
        for line in lines[1:]:
            hm = _HOST_RE.match(line)
            if hm and host_header is None:
                host_header = hm.group(1).decode("latin-1")
                continue
            cm = _CONTENT_LENGTH_RE.match(line)
            if cm:
                content_length = int(cm.group(1))
        low_target = target.lower()
        if low_target.startswith("http://"):
            # proxy-style absolute URI wins over the Host header
            parts = _split_absolute_uri(low_target[:7] + target[7:])
            if parts is None:
                return False
            host, path = parts
        elif target.startswith("/"):
            if not host_header:
                return False
            host = normalize_host(host_header)
            if not host:
                return False
            path = target
        else:
            return False
        ts = self._ts_at(0)
        self.out.append(HttpRequest(
            timestamp=ts,
            src_endpoint=flow.src,
            dst_endpoint=flow.dst,
            method=method,
            host=host,
            path_and_query=path,
        ))
        self.stats.requests += 1
        flow.body_skip = content_length
        return True


def parse_pcap_with_stats(path, ports=frozenset({80})):
    """Extract HTTP/1.x requests from a classic pcap file.

    Returns (requests sorted by timestamp, PcapStats).  Malformed
    individual packets are counted and skipped, never fatal.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    endian, frac_div, linktype = _read_global_header(data)
    rec_hdr = struct.Struct(endian + "IIII")
    stats = PcapStats()
    flows: dict[tuple, _Flow] = {}
    scanners: dict[tuple, _HttpScanner] = {}
    out: list[HttpRequest] = []
    pos = 24
    while pos + 16 <= len(data):
        ts_sec, ts_frac, incl_len, orig_len = rec_hdr.unpack_from(data, pos)
        pos += 16
        if pos + incl_len > len(data):
            stats.skipped_packets += 1
            break
        frame = data[pos:pos + incl_len]
        pos += incl_len
        stats.packets += 1
        ts = ts_sec + ts_frac / frac_div
        ip = _ip_payload(frame, linktype)
        if ip is None:
            stats.skipped_packets += 1
            continue
        tcp = _parse_tcp(ip)
        if tcp is None:
            stats.skipped_packets += 1
            continue
        src, dst, sport, dport, seq, flags, payload = tcp
        if dport not in ports:
            continue
        key = (src, sport, dst, dport)
        flow = flows.get(key)
        if flow is None:
            flow = _Flow(src=f"{src}:{sport}", dst=f"{dst}:{dport}", base_ts=ts)
            flows[key] = flow
            scanners[key] = _HttpScanner(flow, out, stats)
        if flow.dead:
            continue
        scanner = scanners[key]
        syn = flags & 0x02
        if syn:
            flow.expected = (seq + 1) & 0xFFFFFFFF
            continue
        if not payload:
            continue
        if flow.expected is None:
            flow.expected = seq
        _deliver(flow, scanner, seq, payload, ts, stats)
    out.sort(key=lambda r: r.timestamp)
    return out, stats


def _deliver(flow: _Flow, scanner: _HttpScanner, seq: int, payload: bytes,
             ts: float, stats: PcapStats):
    exp = flow.expected
    if seq == exp:
        scanner.feed(payload, ts)
        flow.expected = (exp + len(payload)) & 0xFFFFFFFF
        _drain(flow, scanner)
    elif _seq_lt(seq, exp):
        # retransmission; feed only the unseen tail, if any
        overlap = (exp - seq) & 0xFFFFFFFF
        if overlap < len(payload):
            scanner.feed(payload[overlap:], ts)
            flow.expected = (seq + len(payload)) & 0xFFFFFFFF
            _drain(flow, scanner)
    else:
        flow.pending[seq] = (payload, ts)
        if len(flow.pending) > REORDER_BUFFER_LIMIT:
            flow.dead = True
            flow.pending.clear()
            flow.buf = b""
            stats.broken_flows += 1


def _drain(flow: _Flow, scanner: _HttpScanner):
    while flow.pending:
        nxt = flow.pending.pop(flow.expected, None)
        if nxt is None:
            # tolerate buffered retransmissions overlapping the gap edge
            hit = None
            for seq in flow.pending:
                overlap = (flow.expected - seq) & 0xFFFFFFFF
                if _seq_lt(seq, flow.expected) and \
                        overlap < len(flow.pending[seq][0]):
                    hit = seq
                    break
            if hit is None:
                return
            payload, ts = flow.pending.pop(hit)
            payload = payload[(flow.expected - hit) & 0xFFFFFFFF:]
            nxt = (payload, ts)
        payload, ts = nxt
        scanner.feed(payload, ts)
        flow.expected = (flow.expected + len(payload)) & 0xFFFFFFFF


def _seq_lt(a: int, b: int) -> bool:
    return ((a - b) & 0xFFFFFFFF) > 0x7FFFFFFF
