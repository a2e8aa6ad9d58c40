"""Benchmark the compiled match kernel against the pure-Python fallback.

Compiles the bundled sample filter lists, generates a seeded random URL
workload, and times FilterSet.match_url under each kernel (and with the
literal-substring index disabled, for scale).

    python3 benchmarks/bench_match.py [--urls 20000]
"""

import argparse
import os
import random
import sys
import time

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(HERE)
sys.path.insert(0, os.path.join(ROOT, "tests"))

from netlens.filter_engine import compile_filters, matcher  # noqa: E402
from netlens.filter_engine import _kernel_py  # noqa: E402
from randgen import random_url  # noqa: E402

try:
    from netlens.filter_engine import _kernel_c
except ImportError:
    _kernel_c = None


def load_filter_set():
    lines = []
    for name in ("easylist_sample.txt", "easyprivacy_sample.txt"):
        path = os.path.join(ROOT, "tests", "fixtures", "lists", name)
        lines.extend(open(path, encoding="utf-8").read().splitlines())
    return compile_filters(lines)


def run(filter_set, urls, use_index):
    start = time.perf_counter()
    hits = sum(1 for u in urls if filter_set.match_url(
        u, use_index=use_index).matched)
    return time.perf_counter() - start, hits


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--urls", type=int, default=20000)
    parser.add_argument("--seed", type=int, default=20140714)
    args = parser.parse_args()

    filter_set = load_filter_set()
    rng = random.Random(args.seed)
    urls = [random_url(rng) for _ in range(args.urls)]
    n_rules = len(filter_set.blocking_rules) + len(filter_set.exception_rules)
    print(f"{n_rules} rules, {len(urls)} URLs")

    kernels = [("python", _kernel_py)]
    if _kernel_c is not None:
        kernels.insert(0, ("cython", _kernel_c))
    else:
        print("cython kernel not built; benchmarking fallback only")

    baseline = {}
    for kernel_name, kernel in kernels:
        matcher._kernel = kernel
        for use_index in (True, False):
            mode = "indexed" if use_index else "linear"
            run(filter_set, urls[:500], use_index)  # warm-up
            elapsed, hits = run(filter_set, urls, use_index)
            rate = len(urls) / elapsed
            note = ""
            if (mode in baseline) and baseline[mode][1] != hits:
                note = "  !! hit-count mismatch"
            elif mode in baseline:
                note = f"  ({baseline[mode][0] / elapsed:.2f}x vs cython)"
            else:
                baseline[mode] = (elapsed, hits)
            print(f"{kernel_name:>7} {mode:>8}: {elapsed:6.3f}s "
                  f"{rate:10,.0f} URL/s  {hits} hits{note}")


if __name__ == "__main__":
    main()
