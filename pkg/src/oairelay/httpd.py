"""Small threaded HTTP server with path-pattern routing.

All long-running services (proxy, aggregator, gateway, simulated data
providers) are built on this. Handlers receive a plain request object and
return a response object; concurrency comes from one thread per connection.
Binding to port 0 picks a free ephemeral port, so many servers can coexist
in one process — which the test harness relies on.
"""

from __future__ import annotations

import logging
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

log = logging.getLogger(__name__)


@dataclass
class HttpRequest:
    method: str
    path: str
    query: dict[str, list[str]]
    headers: dict[str, str]
    body: bytes
    client_ip: str
    #: named captures from the matched route pattern
    params: dict[str, str] = field(default_factory=dict)

    def single_query(self) -> dict[str, object]:
        """Query parameters, preserving lists only where a key repeats."""
        return {k: (v[0] if len(v) == 1 else v) for k, v in self.query.items()}

    def header(self, name: str, default: str = "") -> str:
        return self.headers.get(name.lower(), default)


@dataclass
class HttpResponse:
    status: int = 200
    body: bytes = b""
    content_type: str = "text/plain; charset=utf-8"
    headers: dict[str, str] = field(default_factory=dict)

    @classmethod
    def text(cls, status: int, message: str, **headers: str) -> "HttpResponse":
        return cls(status, message.encode(), "text/plain; charset=utf-8", dict(headers))


def _compile(pattern: str) -> re.Pattern:
    regex = re.sub(r"\{(\w+)\}", r"(?P<\1>[^/]+)", pattern)
    return re.compile(f"^{regex}$")


class AppServer:
    """Routes requests to handlers; one instance per listening socket."""

    def __init__(self, name: str = "app", host: str = "127.0.0.1", port: int = 0):
        self.name = name
        self._routes: list[tuple[str, re.Pattern, object]] = []
        self._httpd = ThreadingHTTPServer((host, port), _make_handler(self))
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    # -- routing -------------------------------------------------------------

    def add_route(self, method: str, pattern: str, handler) -> None:
        self._routes.append((method.upper(), _compile(pattern), handler))

    def dispatch(self, request: HttpRequest) -> HttpResponse:
        path_known = False
        for method, pattern, handler in self._routes:
            match = pattern.match(request.path)
            if not match:
                continue
            path_known = True
            if method != request.method:
                continue
            request.params = match.groupdict()
            return handler(request)
        if path_known:
            return HttpResponse.text(405, "method not allowed\n")
        return HttpResponse.text(404, "not found\n")

    # -- lifecycle -----------------------------------------------------------

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        host = self._httpd.server_address[0]
        return f"http://{host}:{self.port}"

    def start(self) -> "AppServer":
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name=f"{self.name}-httpd", daemon=True
        )
        self._thread.start()
        log.info("%s listening on %s", self.name, self.base_url)
        return self

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "AppServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()


def _make_handler(app: AppServer):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "oairelay/0.1"

        def log_message(self, fmt, *args):  # quiet by default
            log.debug("%s %s", app.name, fmt % args)

        def _handle(self, method: str):
            split = urlsplit(self.path)
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            request = HttpRequest(
                method=method,
                path=split.path,
                query=parse_qs(split.query, keep_blank_values=True),
                headers={k.lower(): v for k, v in self.headers.items()},
                body=body,
                client_ip=self.client_address[0],
            )
            try:
                response = app.dispatch(request)
            except Exception:
                log.exception("%s: handler failed for %s %s", app.name, method, self.path)
                response = HttpResponse.text(500, "internal error\n")
            payload = b"" if method == "HEAD" else response.body
            # One connection per request: a stopped server must become
            # unreachable at once, not linger on kept-alive sockets.
            self.close_connection = True
            self.send_response(response.status)
            self.send_header("Content-Type", response.content_type)
            self.send_header("Content-Length", str(len(response.body)))
            self.send_header("Connection", "close")
            for name, value in response.headers.items():
                self.send_header(name, value)
            self.end_headers()
            if payload:
                self.wfile.write(payload)

        def do_GET(self):
            self._handle("GET")

        def do_POST(self):
            self._handle("POST")

        def do_HEAD(self):
            self._handle("HEAD")

    return Handler
