"""HTTP face of the aggregator: harvested records served back out, plus admin.

Endpoints:

- ``GET/POST /oai`` — the merged view over every source.
- ``GET/POST /oai/{repositoryId}`` — the wrapped view of one source; 404 for
  ids never registered.
- ``GET /admin/repositories`` / ``POST /admin/repositories`` — inspect and
  register sources. Registration performs the handshake immediately and
  reports the resulting status.
- ``POST /admin/harvest`` — immediate harvest of one repository.
- ``GET /admin/status`` — repositories, watermarks, failure counts, record
  counts; machine readable.
- ``GET /healthz`` — liveness.

Protocol requests accept both GET query strings and form-encoded POST
bodies; the two argument sources are merged so a repeated argument is still
detected as such.
"""

from __future__ import annotations

import json
import logging
import threading
from urllib.parse import parse_qs

import requests

from oairelay.aggregator.collisions import CollisionPolicy
from oairelay.aggregator.harvest import Harvester
from oairelay.aggregator.scheduler import HarvestScheduler
from oairelay.aggregator.serve import (
    AGGREGATED,
    DEFAULT_PAGE_SIZE,
    TOKEN_TTL_SECONDS,
    UnknownView,
    ViewServer,
)
from oairelay.aggregator.sources import RegistrationError, SourceRegistry
from oairelay.aggregator.store import RecordStore
from oairelay.clock import Clock, SystemClock
from oairelay.httpd import AppServer, HttpRequest, HttpResponse
from oairelay.protocol.serialize import CONTENT_TYPE

log = logging.getLogger(__name__)

JSON_TYPE = "application/json; charset=utf-8"


class AggregatorService:
    def __init__(
        self,
        storage_dir,
        *,
        clock: Clock | None = None,
        policy: CollisionPolicy | None = None,
        repository_name: str = "Aggregating relay",
        admin_email: str = "admin@relay.invalid",
        page_size: int = DEFAULT_PAGE_SIZE,
        token_ttl: int = TOKEN_TTL_SECONDS,
        session: requests.Session | None = None,
        timeout: float = 30.0,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.clock = clock or SystemClock()
        self.store = RecordStore(storage_dir)
        self.registry = SourceRegistry(
            self.store, self.clock, session=session, timeout=timeout
        )
        self.policy = policy or CollisionPolicy()
        self.harvester = Harvester(
            self.store,
            self.registry,
            self.policy,
            self.clock,
            session=session,
            timeout=timeout,
        )
        self.scheduler = HarvestScheduler(self.harvester, self.registry, self.clock)
        self.views = ViewServer(
            self.store,
            self.registry,
            self.clock,
            base_url="http://unbound.invalid/oai",
            repository_name=repository_name,
            admin_email=admin_email,
            page_size=page_size,
            token_ttl=token_ttl,
        )
        self.app = AppServer("aggregator", host=host, port=port)
        for method in ("GET", "POST"):
            self.app.add_route(method, "/oai", self._handle_aggregated)
            self.app.add_route(method, "/oai/{repository_id}", self._handle_wrapped)
        self.app.add_route("GET", "/admin/repositories", self._list_repositories)
        self.app.add_route("POST", "/admin/repositories", self._register_repository)
        self.app.add_route("POST", "/admin/harvest", self._harvest_now)
        self.app.add_route("GET", "/admin/status", self._status)
        self.app.add_route("GET", "/healthz", lambda req: HttpResponse.text(200, "ok"))
        self._ticker: threading.Thread | None = None
        self._stop = threading.Event()

    # -- lifecycle -----------------------------------------------------------

    def start(self, tick_interval: float | None = None) -> "AggregatorService":
        self.app.start()
        self.views.base_url = f"{self.app.base_url}/oai"
        if tick_interval:
            self._ticker = threading.Thread(
                target=self._tick_loop, args=(tick_interval,), daemon=True
            )
            self._ticker.start()
        return self

    def close(self) -> None:
        self._stop.set()
        if self._ticker is not None:
            self._ticker.join(timeout=5)
        self.app.close()

    def __enter__(self) -> "AggregatorService":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()

    def _tick_loop(self, interval: float) -> None:
        while not self._stop.wait(interval):
            try:
                self.scheduler.tick()
            except Exception:
                log.exception("scheduler tick failed")

    @property
    def oai_url(self) -> str:
        return f"{self.app.base_url}/oai"

    def wrapped_url(self, repository_id: str) -> str:
        return f"{self.app.base_url}/oai/{repository_id}"

    # -- protocol endpoints --------------------------------------------------

    def _oai_arguments(self, request: HttpRequest) -> dict[str, list[str]]:
        args = {k: list(v) for k, v in request.query.items()}
        content_type = request.header("content-type", "")
        if request.method == "POST" and "form-urlencoded" in content_type:
            for key, values in parse_qs(
                request.body.decode("utf-8", "replace"), keep_blank_values=True
            ).items():
                args.setdefault(key, []).extend(values)
        return args

    def _handle_aggregated(self, request: HttpRequest) -> HttpResponse:
        body = self.views.handle(AGGREGATED, self._oai_arguments(request))
        return HttpResponse(200, body, CONTENT_TYPE)

    def _handle_wrapped(self, request: HttpRequest) -> HttpResponse:
        view = request.params["repository_id"]
        try:
            body = self.views.handle(view, self._oai_arguments(request))
        except UnknownView:
            return HttpResponse.text(404, f"no such repository: {view}")
        return HttpResponse(200, body, CONTENT_TYPE)

    # -- admin endpoints -----------------------------------------------------

    def _list_repositories(self, request: HttpRequest) -> HttpResponse:
        body = _json({"repositories": [r.to_dict() for r in self.registry.all()]})
        return HttpResponse(200, body, JSON_TYPE)

    def _register_repository(self, request: HttpRequest) -> HttpResponse:
        try:
            raw = json.loads(request.body.decode("utf-8"))
            repository_id = raw["repositoryId"]
            base_url = raw["baseURL"]
            trust_rank = int(raw["trustRank"])
        except (ValueError, KeyError, UnicodeDecodeError) as exc:
            return HttpResponse.text(400, f"bad registration body: {exc}")
        try:
            repo = self.registry.add(
                repository_id,
                base_url,
                trust_rank,
                poll_interval=int(raw.get("pollIntervalSeconds", 3600)),
                reliability_mode=raw.get("reliabilityMode", "batch"),
            )
        except RegistrationError as exc:
            return HttpResponse.text(409, str(exc))
        except ValueError as exc:
            return HttpResponse.text(400, str(exc))
        status = {"active": 201, "pending": 202, "rejected": 422}.get(repo.status, 200)
        return HttpResponse(status, _json(repo.to_dict()), JSON_TYPE)

    def _harvest_now(self, request: HttpRequest) -> HttpResponse:
        try:
            raw = json.loads(request.body.decode("utf-8")) if request.body else {}
            repository_id = raw["repositoryId"]
        except (ValueError, KeyError) as exc:
            return HttpResponse.text(400, f"bad harvest body: {exc}")
        if self.registry.get(repository_id) is None:
            return HttpResponse.text(404, f"no such repository: {repository_id}")
        results = self.scheduler.harvest_now(repository_id)
        repo = self.registry.get(repository_id)
        body = _json(
            {
                "repositoryId": repository_id,
                "ok": all(r.ok for r in results),
                "harvests": [r.to_dict() for r in results],
                "repository": repo.to_dict() if repo else None,
            }
        )
        return HttpResponse(200, body, JSON_TYPE)

    def _status(self, request: HttpRequest) -> HttpResponse:
        return HttpResponse(200, _json(self.status()), JSON_TYPE)

    def status(self) -> dict:
        per_source: dict[str, int] = {}
        for entries in self.store.entries().values():
            for source_id in entries:
                per_source[source_id] = per_source.get(source_id, 0) + 1
        return {
            "generation": self.store.generation,
            "records": self.store.record_count(),
            "identifiers": self.store.key_count(),
            "repositories": [
                {**r.to_dict(), "storedRecords": per_source.get(r.repository_id, 0)}
                for r in self.registry.all()
            ],
        }


def _json(data) -> bytes:
    return (json.dumps(data, indent=2, sort_keys=True) + "\n").encode()
