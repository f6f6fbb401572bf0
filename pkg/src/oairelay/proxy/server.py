"""The repairing proxy service.

Pipeline per request: resolve the route, forward the query upstream, then
repair the response body (encoding, escaping, quoting), validate it, drop
records that still violate the protocol, and emit the result. Clean bodies
pass through byte-identically. Every request gets an id (returned in the
``X-Request-Id`` header) under which the repair report can be fetched from
the admin endpoint.

Two addressing styles are served:

- path style:        ``GET {prefix}/{repositoryId}?verb=...``
- transparent style: ``GET {prefix}?url=<upstream base URL>&verb=...``
"""

from __future__ import annotations

import itertools
import json
import logging
import threading
from collections import OrderedDict
from urllib.parse import urlsplit

import requests

from oairelay.httpd import AppServer, HttpRequest, HttpResponse
from oairelay.proxy.routes import RoutingTable, UnknownRoute
from oairelay.repair.pipeline import repair_response
from oairelay.protocol.serialize import CONTENT_TYPE

log = logging.getLogger(__name__)


class RepairProxy:
    def __init__(
        self,
        table: RoutingTable,
        *,
        timeout: float = 30.0,
        report_ring_size: int = 256,
        report_log_path: str | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.table = table
        self.timeout = timeout
        self._ids = itertools.count(1)
        self._reports: OrderedDict[str, dict] = OrderedDict()
        self._ring_size = report_ring_size
        self._report_log_path = report_log_path
        self._lock = threading.Lock()
        self._session = requests.Session()

        self.app = AppServer("repair-proxy", host=host, port=port)
        prefix = table.prefix
        self.app.add_route("GET", prefix, self._handle_transparent)
        self.app.add_route("GET", f"{prefix}/{{repository_id}}", self._handle_routed)
        self.app.add_route("GET", "/admin/routes", self._admin_routes)
        self.app.add_route("GET", "/admin/reports/{request_id}", self._admin_report)
        self.app.add_route("GET", "/healthz", lambda req: HttpResponse.text(200, "ok\n"))

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> "RepairProxy":
        self.app.start()
        return self

    def close(self) -> None:
        self.app.close()
        self._session.close()

    def __enter__(self) -> "RepairProxy":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def base_url(self) -> str:
        return self.app.base_url

    def url_for(self, repository_id: str) -> str:
        """The proxied base URL clients should harvest instead of the upstream."""
        return f"{self.base_url}{self.table.prefix}/{repository_id}"

    # -- request handling ----------------------------------------------------

    def _handle_routed(self, request: HttpRequest) -> HttpResponse:
        try:
            route = self.table.get(request.params["repository_id"])
        except UnknownRoute as exc:
            return HttpResponse.text(404, f"unknown repository id: {exc.args[0]}\n")
        return self._forward(request, route.base_url, route.repository_id)

    def _handle_transparent(self, request: HttpRequest) -> HttpResponse:
        urls = request.query.get("url", [])
        if len(urls) != 1 or not urls[0]:
            return HttpResponse.text(
                400, "transparent mode needs exactly one url query parameter\n"
            )
        upstream = urls[0]
        if urlsplit(upstream).scheme not in ("http", "https"):
            return HttpResponse.text(400, f"not an http(s) URL: {upstream}\n")
        return self._forward(request, upstream, route_id=None)

    def _forward(
        self, request: HttpRequest, upstream: str, route_id: str | None
    ) -> HttpResponse:
        request_id = f"req-{next(self._ids):06d}"
        oai_args = [
            (key, value)
            for key, values in request.query.items()
            if key != "url"
            for value in values
        ]
        record = {
            "requestId": request_id,
            "route": route_id,
            "upstreamUrl": upstream,
            "query": dict(oai_args),
        }

        try:
            upstream_response = self._session.get(
                upstream, params=oai_args, timeout=self.timeout
            )
        except requests.exceptions.Timeout:
            record.update(outcome="upstream-timeout", proxyStatus=504)
            self._file_report(record)
            return self._finish(
                HttpResponse.text(504, f"upstream timed out: {upstream}\n"), request_id
            )
        except requests.exceptions.RequestException as exc:
            record.update(outcome="upstream-unreachable", proxyStatus=502)
            self._file_report(record)
            return self._finish(
                HttpResponse.text(502, f"upstream unreachable: {exc}\n"), request_id
            )

        record["upstreamStatus"] = upstream_response.status_code
        if upstream_response.status_code != 200:
            record.update(outcome="passthrough-non-200",
                          proxyStatus=upstream_response.status_code)
            self._file_report(record)
            passthrough = HttpResponse(
                status=upstream_response.status_code,
                body=upstream_response.content,
                content_type=upstream_response.headers.get(
                    "Content-Type", "application/octet-stream"
                ),
            )
            retry_after = upstream_response.headers.get("Retry-After")
            if retry_after:
                passthrough.headers["Retry-After"] = retry_after
            return self._finish(passthrough, request_id)

        prefix_values = request.query.get("metadataPrefix", [])
        metadata_prefix = prefix_values[0] if len(prefix_values) == 1 else None
        outcome = repair_response(upstream_response.content, metadata_prefix=metadata_prefix)
        record["report"] = outcome.report.to_dict()
        record["outcome"] = outcome.status

        if not outcome.ok:
            record["proxyStatus"] = 502
            self._file_report(record)
            reasons = "; ".join(
                f"{v.klass}: {v.message}" for v in outcome.report.residual_violations
            )
            return self._finish(
                HttpResponse.text(502, f"unrepairable upstream response: {reasons}\n"),
                request_id,
            )

        record["proxyStatus"] = 200
        self._file_report(record)
        return self._finish(
            HttpResponse(200, outcome.body, CONTENT_TYPE), request_id
        )

    def _finish(self, response: HttpResponse, request_id: str) -> HttpResponse:
        response.headers["X-Request-Id"] = request_id
        return response

    # -- reports -------------------------------------------------------------

    def _file_report(self, record: dict) -> None:
        with self._lock:
            self._reports[record["requestId"]] = record
            while len(self._reports) > self._ring_size:
                self._reports.popitem(last=False)
            if self._report_log_path:
                with open(self._report_log_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")

    def report_for(self, request_id: str) -> dict | None:
        with self._lock:
            return self._reports.get(request_id)

    # -- admin endpoints -----------------------------------------------------

    def _admin_routes(self, request: HttpRequest) -> HttpResponse:
        payload = {
            "prefix": self.table.prefix,
            "routes": [
                {"repositoryId": r.repository_id, "baseURL": r.base_url}
                for r in self.table.all()
            ],
        }
        return HttpResponse(200, _json_bytes(payload), "application/json")

    def _admin_report(self, request: HttpRequest) -> HttpResponse:
        report = self.report_for(request.params["request_id"])
        if report is None:
            return HttpResponse.text(404, "no such report (evicted or never issued)\n")
        return HttpResponse(200, _json_bytes(report), "application/json")


def _json_bytes(payload: dict) -> bytes:
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()
