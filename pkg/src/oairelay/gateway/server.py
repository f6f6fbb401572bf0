"""The gateway's HTTP service.

Routes:

- ``GET /gw/{repositoryId}/{identifier}`` — one record as HTML; the
  identifier segment is fully percent-encoded. Unknown id → 404, deleted
  record → 410, aggregator down → 503.
- ``GET /gw/{repositoryId}/index/{page}`` — paged link lists over the
  repository's records; pages past the end → 404.
- ``GET /robots.txt`` — allow-all, except repositories excluded by config.
- ``GET /sitemap.xml`` — every index page of every non-excluded repository.
- ``GET /healthz`` — liveness.

Record and index ordering is the aggregator's served order (lexicographic
by identifier), so navigation stays stable across harvests. Deleted records
keep their URL (answering 410) but are not listed or linked. Every ``/gw/``
request first passes the per-client token bucket; over-rate clients get 429
with a Retry-After.
"""

from __future__ import annotations

import logging
import math

import requests

from oairelay.clock import Clock, SystemClock
from oairelay.gateway.backend import (
    AggregatorClient,
    BackendError,
    UnknownRepository,
)
from oairelay.gateway.pages import (
    identifier_from_segment,
    render_index_page,
    render_record_page,
    render_robots,
    render_sitemap,
)
from oairelay.gateway.throttle import ThrottleMap
from oairelay.httpd import AppServer, HttpRequest, HttpResponse

log = logging.getLogger(__name__)

HTML_TYPE = "text/html; charset=utf-8"
DEFAULT_PAGE_SIZE = 50


class GatewayService:
    def __init__(
        self,
        backing_url: str,
        *,
        metadata_prefix: str = "oai_dc",
        page_size: int = DEFAULT_PAGE_SIZE,
        throttle_capacity: int = 30,
        throttle_refill: float = 2.0,
        excluded: tuple[str, ...] = (),
        clock: Clock | None = None,
        session: requests.Session | None = None,
        timeout: float = 10.0,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.clock = clock or SystemClock()
        self.backend = AggregatorClient(backing_url, session=session, timeout=timeout)
        self.metadata_prefix = metadata_prefix
        self.page_size = page_size
        self.excluded = tuple(excluded)
        self.throttle = ThrottleMap(throttle_capacity, throttle_refill, self.clock)
        self.app = AppServer("gateway", host=host, port=port)
        self.app.add_route("GET", "/gw/{repository_id}/index/{page}", self._index_page)
        self.app.add_route("GET", "/gw/{repository_id}/{identifier}", self._record_page)
        self.app.add_route("GET", "/robots.txt", self._robots)
        self.app.add_route("GET", "/sitemap.xml", self._sitemap)
        self.app.add_route("GET", "/healthz", lambda req: HttpResponse.text(200, "ok"))

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> "GatewayService":
        self.app.start()
        return self

    def close(self) -> None:
        self.app.close()

    def __enter__(self) -> "GatewayService":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def base_url(self) -> str:
        return self.app.base_url

    # -- helpers -------------------------------------------------------------

    def _client_key(self, request: HttpRequest) -> str:
        forwarded = request.header("x-forwarded-for")
        if forwarded:
            return forwarded.split(",")[0].strip()
        return request.client_ip

    def _throttled(self, request: HttpRequest) -> HttpResponse | None:
        admission = self.throttle.check(self._client_key(request))
        if admission.admitted:
            return None
        return HttpResponse.text(
            429,
            "rate limit exceeded",
            **{"Retry-After": str(admission.retry_after)},
        )

    def _listed_headers(self, repository_id: str):
        """The repository's linkable records: served order, deletions out."""
        headers = self.backend.list_headers(repository_id, self.metadata_prefix)
        return [h for h in headers if not h.deleted]

    # -- pages ---------------------------------------------------------------

    def _record_page(self, request: HttpRequest) -> HttpResponse:
        rejected = self._throttled(request)
        if rejected is not None:
            return rejected
        repository_id = request.params["repository_id"]
        identifier = identifier_from_segment(request.params["identifier"])
        try:
            record = self.backend.get_record(
                repository_id, identifier, self.metadata_prefix
            )
            if record is None:
                return HttpResponse.text(404, f"no such record: {identifier}")
            if record.header.deleted:
                return HttpResponse.text(410, f"record was deleted: {identifier}")
            listed = self._listed_headers(repository_id)
        except UnknownRepository as exc:
            return HttpResponse.text(404, str(exc))
        except BackendError as exc:
            return HttpResponse.text(503, str(exc))
        identifiers = [h.identifier for h in listed]
        try:
            position = identifiers.index(identifier)
        except ValueError:
            position = None
        prev_id = identifiers[position - 1] if position not in (None, 0) else None
        next_id = (
            identifiers[position + 1]
            if position is not None and position + 1 < len(identifiers)
            else None
        )
        body = render_record_page(repository_id, record, prev_id, next_id)
        return HttpResponse(200, body, HTML_TYPE)

    def _index_page(self, request: HttpRequest) -> HttpResponse:
        rejected = self._throttled(request)
        if rejected is not None:
            return rejected
        repository_id = request.params["repository_id"]
        try:
            page = int(request.params["page"])
        except ValueError:
            return HttpResponse.text(404, "no such index page")
        if page < 0:
            return HttpResponse.text(404, "no such index page")
        try:
            listed = self._listed_headers(repository_id)
        except UnknownRepository as exc:
            return HttpResponse.text(404, str(exc))
        except BackendError as exc:
            return HttpResponse.text(503, str(exc))
        page_count = max(1, math.ceil(len(listed) / self.page_size))
        if page >= page_count:
            return HttpResponse.text(404, "no such index page")
        start = page * self.page_size
        body = render_index_page(
            repository_id, page, listed[start : start + self.page_size], page_count
        )
        return HttpResponse(200, body, HTML_TYPE)

    # -- crawler metadata ----------------------------------------------------

    def _robots(self, request: HttpRequest) -> HttpResponse:
        return HttpResponse(
            200, render_robots(list(self.excluded)), "text/plain; charset=utf-8"
        )

    def _sitemap(self, request: HttpRequest) -> HttpResponse:
        try:
            repository_ids = [
                rid for rid in self.backend.repositories() if rid not in self.excluded
            ]
            index_pages = {
                rid: max(1, math.ceil(len(self._listed_headers(rid)) / self.page_size))
                for rid in repository_ids
            }
        except BackendError as exc:
            return HttpResponse.text(503, str(exc))
        body = render_sitemap(self.base_url, index_pages)
        return HttpResponse(200, body, "application/xml; charset=utf-8")
