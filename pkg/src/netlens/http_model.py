"""Core HTTP request model shared by the ingest paths."""

from __future__ import annotations

from dataclasses import dataclass, field

UNKNOWN_ENDPOINT = "unknown"

# Google Play store categories (as of July 2014) plus the fallback bucket.
STORE_CATEGORIES = frozenset({
    "GAME", "NEWS_AND_MAGAZINES", "COMICS",
    "LIBRARIES_AND_DEMO", "COMMUNICATION", "ENTERTAINMENT",
    "EDUCATION", "FINANCE", "LIFESTYLE",
    "BOOKS_AND_REFERENCE", "MEDICAL", "WEATHER",
    "MEDIA_AND_VIDEO", "MUSIC_AND_AUDIO", "TOOLS",
    "PERSONALIZATION", "PHOTOGRAPHY", "PRODUCTIVITY",
    "BUSINESS", "HEALTH_AND_FITNESS", "SHOPPING",
    "SOCIAL", "SPORTS", "TRANSPORTATION", "TRAVEL_AND_LOCAL",
})
UNKNOWN_CATEGORY = "UNKNOWN"


def normalize_host(hostport: str) -> str:
    """Lowercase a host[:port] string and elide the default port."""
    host = hostport.strip().lower()
    if host.endswith(":80"):
        host = host[:-3]
    return host


@dataclass(frozen=True)
class HttpRequest:
    timestamp: float
    src_endpoint: str
    dst_endpoint: str
    method: str
    host: str
    path_and_query: str

    def __post_init__(self):
        if not self.host:
            raise ValueError("HttpRequest.host must be non-empty")
        if self.host != self.host.lower():
            raise ValueError("HttpRequest.host must be lowercase")

    @property
    def full_url(self) -> str:
        return f"http://{self.host}{self.path_and_query}"


@dataclass(frozen=True)
class AppMetadata:
    name: str
    category: str = UNKNOWN_CATEGORY
    rating: float | None = None
    downloads: int | None = None
    top_developer: bool = False

    def __post_init__(self):
        if self.category not in STORE_CATEGORIES and \
                self.category != UNKNOWN_CATEGORY:
            raise ValueError(f"unknown store category {self.category!r}")
        if self.rating is not None and not 1.0 <= self.rating <= 5.0:
            raise ValueError(f"rating out of range: {self.rating}")
        if self.downloads is not None and self.downloads < 0:
            raise ValueError("downloads must be nonnegative")


@dataclass(frozen=True)
class AppTraceInput:
    app_id: str
    source: str                # pcap or URL-log file path
    metadata: AppMetadata = field(default_factory=lambda: AppMetadata(name=""))

    @property
    def is_pcap(self) -> bool:
        return self.source.endswith((".pcap", ".cap"))
