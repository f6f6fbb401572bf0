"""Routing table mapping repository ids to upstream base URLs."""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from urllib.parse import urlsplit

_ID_RE = re.compile(r"^[A-Za-z0-9_\-.]+$")


class UnknownRoute(KeyError):
    """The trailing path segment names no configured repository."""


def _normalize_url(url: str) -> str:
    if not urlsplit(url).scheme:
        url = "http://" + url
    scheme = urlsplit(url).scheme
    if scheme not in ("http", "https"):
        raise ValueError(f"route base URL must be http(s), got {url!r}")
    return url


@dataclass(frozen=True)
class ProxyRoute:
    repository_id: str
    base_url: str

    def __post_init__(self):
        if not _ID_RE.match(self.repository_id):
            raise ValueError(f"illegal repository id {self.repository_id!r}")
        object.__setattr__(self, "base_url", _normalize_url(self.base_url))


class RoutingTable:
    """Read-mostly id -> route map with atomic wholesale replacement."""

    def __init__(self, routes: list[ProxyRoute] | None = None, prefix: str = "/proxy"):
        self.prefix = prefix.rstrip("/")
        self._lock = threading.Lock()
        self._routes: dict[str, ProxyRoute] = {}
        if routes:
            self.replace(routes)

    def replace(self, routes: list[ProxyRoute]) -> None:
        table: dict[str, ProxyRoute] = {}
        for route in routes:
            if route.repository_id in table:
                raise ValueError(f"duplicate repository id {route.repository_id!r}")
            table[route.repository_id] = route
        with self._lock:
            self._routes = table

    def resolve(self, path: str) -> ProxyRoute:
        """Route for a request path; the trailing segment is the repository id."""
        segment = path.rstrip("/").rpartition("/")[2]
        with self._lock:
            route = self._routes.get(segment)
        if route is None:
            raise UnknownRoute(segment)
        return route

    def get(self, repository_id: str) -> ProxyRoute:
        with self._lock:
            route = self._routes.get(repository_id)
        if route is None:
            raise UnknownRoute(repository_id)
        return route

    def all(self) -> list[ProxyRoute]:
        with self._lock:
            return sorted(self._routes.values(), key=lambda r: r.repository_id)

    @classmethod
    def from_config(cls, entries: list[dict], prefix: str = "/proxy") -> "RoutingTable":
        routes = [
            ProxyRoute(e["repositoryId"], e["baseURL"]) for e in entries
        ]
        return cls(routes, prefix=prefix)


def default_routes() -> list[ProxyRoute]:
    """The two well-known example routes the service ships preconfigured with."""
    return [
        ProxyRoute("cogprints", "cogprints.soton.ac.uk/perl/oai"),
        ProxyRoute("bmc", "www.biomedcentral.com/oai/1.1/bmcoai.asp"),
    ]
