"""Pure-Python pattern-matching kernel.

This is the reference implementation of the hot inner loop; the compiled
twin in ``_kernel_c.pyx`` must behave identically.  Both operate on
pre-lowercased pattern and URL strings where ``*`` is a wildcard spanning
any run of characters and ``^`` is the separator class (any character
that is not alphanumeric, ``_``, ``-``, ``.`` or ``%``, or the end of
the URL).

Anchor modes:
  0  plain     -- pattern may match anywhere in the URL
  1  start     -- pattern must match at position 0
  2  host      -- pattern must match at the start of the hostname or at
                  any label boundary (position following a ``.``) inside
                  the hostname
"""

ANCHOR_PLAIN = 0
ANCHOR_START = 1
ANCHOR_HOST = 2

_URL_CHARS = frozenset(
    "abcdefghijklmnopqrstuvwxyz0123456789_-.%ABCDEFGHIJKLMNOPQRSTUVWXYZ"
)


def _match_at(pattern: str, url: str, start: int, anchor_end: bool) -> bool:
    """Glob-style match of pattern against url beginning at start."""
    m = len(pattern)
    n = len(url)
    pi = 0
    j = start
    star_pi = -1
    star_j = 0
    while True:
        if pi < m:
            c = pattern[pi]
            if c == "*":
                star_pi = pi
                star_j = j
                pi += 1
                continue
            if c == "^":
                if j < n and url[j] not in _URL_CHARS:
                    pi += 1
                    j += 1
                    continue
                if j == n:
                    # separator also matches end of address (zero width)
                    pi += 1
                    continue
            elif j < n and url[j] == c:
                pi += 1
                j += 1
                continue
        else:
            if not anchor_end or j == n:
                return True
        if star_pi >= 0 and star_j < n:
            star_j += 1
            pi = star_pi + 1
            j = star_j
            continue
        return False


def match_pattern(
    pattern: str,
    url: str,
    host_start: int,
    host_end: int,
    anchor_mode: int,
    anchor_end: bool,
) -> bool:
    """Return True when the compiled pattern matches the URL."""
    if anchor_mode == ANCHOR_START:
        return _match_at(pattern, url, 0, anchor_end)
    if anchor_mode == ANCHOR_HOST:
        if _match_at(pattern, url, host_start, anchor_end):
            return True
        for i in range(host_start + 1, host_end + 1):
            if url[i - 1] == "." and _match_at(pattern, url, i, anchor_end):
                return True
        return False
    # plain: try every start position; skip ahead on a literal first char
    n = len(url)
    first = pattern[0] if pattern else ""
    if first and first != "*" and first != "^":
        s = url.find(first)
        while s != -1:
            if _match_at(pattern, url, s, anchor_end):
                return True
            s = url.find(first, s + 1)
        return False
    for s in range(n + 1):
        if _match_at(pattern, url, s, anchor_end):
            return True
    return False


IMPL = "python"
