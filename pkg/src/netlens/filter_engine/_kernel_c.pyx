# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twin of ``_kernel_py``; see that module for semantics."""

ANCHOR_PLAIN = 0
ANCHOR_START = 1
ANCHOR_HOST = 2


cdef inline bint _is_url_char(Py_UCS4 c):
    if c >= u"a" and c <= u"z":
        return True
    if c >= u"0" and c <= u"9":
        return True
    if c >= u"A" and c <= u"Z":
        return True
    return c == u"_" or c == u"-" or c == u"." or c == u"%"


cdef bint _match_at(str pattern, str url, Py_ssize_t start, bint anchor_end):
    cdef Py_ssize_t m = len(pattern)
    cdef Py_ssize_t n = len(url)
    cdef Py_ssize_t pi = 0
    cdef Py_ssize_t j = start
    cdef Py_ssize_t star_pi = -1
    cdef Py_ssize_t star_j = 0
    cdef Py_UCS4 c
    while True:
        if pi < m:
            c = pattern[pi]
            if c == u"*":
                star_pi = pi
                star_j = j
                pi += 1
                continue
            if c == u"^":
                if j < n and not _is_url_char(url[j]):
                    pi += 1
                    j += 1
                    continue
                if j == n:
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


def match_pattern(str pattern, str url, Py_ssize_t host_start,
                  Py_ssize_t host_end, int anchor_mode, bint anchor_end):
    """Return True when the compiled pattern matches the URL."""
    cdef Py_ssize_t n = len(url)
    cdef Py_ssize_t i, s
    if anchor_mode == ANCHOR_START:
        return _match_at(pattern, url, 0, anchor_end)
    if anchor_mode == ANCHOR_HOST:
        if _match_at(pattern, url, host_start, anchor_end):
            return True
        for i in range(host_start + 1, host_end + 1):
            if url[i - 1] == u"." and _match_at(pattern, url, i, anchor_end):
                return True
        return False
    cdef str first = pattern[0] if len(pattern) > 0 else ""
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


IMPL = "cython"
