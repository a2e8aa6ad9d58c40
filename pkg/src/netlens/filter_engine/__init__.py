"""Adblock-syntax filter-list parsing and URL matching.

The pattern-match inner loop has a compiled (Cython) implementation with
a pure-Python fallback; the compiled one is preferred when importable.
"""

try:
    from . import _kernel_c as _kernel  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on build environment
    from . import _kernel_py as _kernel

KERNEL_IMPL = _kernel.IMPL

from .rules import (  # noqa: E402
    FilterRule,
    RuleKind,
    RuleOptions,
    Skipped,
    ThirdParty,
    parse_rule,
)
from .matcher import (  # noqa: E402
    FilterSet,
    MatchResult,
    ParseStats,
    compile_filters,
)

__all__ = [
    "FilterRule",
    "RuleKind",
    "RuleOptions",
    "Skipped",
    "ThirdParty",
    "parse_rule",
    "FilterSet",
    "MatchResult",
    "ParseStats",
    "compile_filters",
    "KERNEL_IMPL",
]
