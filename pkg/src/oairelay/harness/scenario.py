"""Declarative scenarios: build a deployment, script events, check outcomes.

A scenario file (YAML) names simulated providers, an aggregator wired to
them, optionally a gateway, and then a list of steps. Steps either move the
simulated world (advance the clock, harvest, mutate or delete records, take
a provider down, crash the aggregator process) or assert something about
it. Assertions never abort the run; each one lands in the report as
pass/fail, and the scenario passes when they all do.

Step vocabulary (each step is a one-key mapping):

- ``advance: {seconds}``
- ``harvest: {repository}`` — one repository id or ``all``
- ``tick: {}`` — run the scheduler once
- ``mutate: {provider, identifier}`` — touch a record at the current instant
- ``delete: {provider, identifier}``
- ``kill: {provider}`` / ``restart: {provider}`` — 503 outage toggle
- ``crashAggregator: {}`` — discard the aggregator mid-flight and restart
  it from its on-disk store, same port
- ``snapshotRequests: {provider, as}`` — remember the request counter
- ``assert: {<check>: {...}}``

Checks: ``aggregatedCount`` (expect / expectLive), ``verbAnswers`` /
``verbError`` (view: ``aggregated`` or a repository id), ``harvestOk`` /
``harvestFailed``, ``requestsUnchanged`` (provider, since),
``matchesDirectHarvest`` (provider; set equality against an independent
direct harvest — note this talks to the provider and moves its counter),
``servedDatestamp`` / ``originalDatestamp`` (identifier, expect),
``gatewayCrawl`` (repository, expectRecords).
"""

from __future__ import annotations

import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import requests
import yaml

from oairelay.aggregator.collisions import CollisionPolicy
from oairelay.aggregator.service import AggregatorService
from oairelay.clock import SimClock
from oairelay.gateway.server import GatewayService
from oairelay.harness import oracle
from oairelay.harness.faults import FaultSpec
from oairelay.harness.simdp import SimDpConfig, SimulatedProvider
from oairelay.protocol.datestamp import Datestamp

OAI_NS = "{http://www.openarchives.org/OAI/2.0/}"


class ScenarioError(Exception):
    """The scenario file itself is unusable."""


@dataclass
class AssertionResult:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class ScenarioReport:
    name: str
    assertions: list[AssertionResult] = field(default_factory=list)
    steps_run: int = 0

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "stepsRun": self.steps_run,
            "assertions": [a.to_dict() for a in self.assertions],
        }


def load_scenario(path: str | Path) -> dict:
    try:
        spec = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ScenarioError(f"cannot load scenario: {exc}") from exc
    if not isinstance(spec, dict) or "steps" not in spec:
        raise ScenarioError("a scenario needs a mapping with a 'steps' list")
    return spec


def run_scenario(spec: dict, *, storage_root: str | Path | None = None) -> ScenarioReport:
    runner = ScenarioRunner(spec, storage_root=storage_root)
    try:
        return runner.run()
    finally:
        runner.close()


class ScenarioRunner:
    def __init__(self, spec: dict, *, storage_root: str | Path | None = None):
        self.spec = spec
        self.report = ScenarioReport(str(spec.get("name", "unnamed")))
        self.root = (
            Path(storage_root)
            if storage_root
            else Path(tempfile.mkdtemp(prefix="scenario-"))
        )
        self.root.mkdir(parents=True, exist_ok=True)
        start = spec.get("clockStart")
        self.clock = SimClock(Datestamp.parse(start).instant if start else None)
        self.seed = int(spec.get("seed", 0))
        self.providers: dict[str, SimulatedProvider] = {}
        self.aggregator: AggregatorService | None = None
        self.gateway: GatewayService | None = None
        self.snapshots: dict[str, int] = {}
        self.last_harvests: list = []
        self._build()

    # -- provisioning --------------------------------------------------------

    def _build(self) -> None:
        for raw in self.spec.get("providers", []):
            try:
                config = SimDpConfig(
                    repository_id=raw["repositoryId"],
                    record_count=int(raw.get("records", 50)),
                    formats=tuple(raw.get("formats", ("oai_dc",))),
                    page_size=int(raw.get("pageSize", 25)),
                    protocol_version=str(raw.get("protocolVersion", "2.0")),
                    faults=tuple(
                        FaultSpec(f["kind"], float(f["rate"]), int(f.get("seed", self.seed)))
                        for f in raw.get("faults", [])
                    ),
                    seed=int(raw.get("seed", self.seed)),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ScenarioError(f"bad provider entry {raw!r}: {exc}") from exc
            self.providers[config.repository_id] = SimulatedProvider(
                config, self.clock
            ).start()

        agg_spec = self.spec.get("aggregator")
        if agg_spec is not None:
            policy = (
                CollisionPolicy.from_config(agg_spec["policy"])
                if "policy" in agg_spec
                else CollisionPolicy()
            )
            self.aggregator = AggregatorService(
                self.root / "store",
                clock=self.clock,
                policy=policy,
                page_size=int(agg_spec.get("pageSize", 100)),
            ).start()
            for source in agg_spec.get("sources", []):
                try:
                    provider = self.providers[source["repositoryId"]]
                    self.aggregator.registry.add(
                        source["repositoryId"],
                        provider.oai_url,
                        int(source["trustRank"]),
                        poll_interval=int(source.get("pollIntervalSeconds", 3600)),
                        reliability_mode=source.get("reliabilityMode", "batch"),
                    )
                except KeyError as exc:
                    raise ScenarioError(f"bad source entry {source!r}: {exc}") from exc

        gw_spec = self.spec.get("gateway")
        if gw_spec is not None:
            if self.aggregator is None:
                raise ScenarioError("a gateway needs an aggregator section")
            throttle = gw_spec.get("throttle", {})
            self.gateway = GatewayService(
                self.aggregator.oai_url,
                page_size=int(gw_spec.get("pageSize", 50)),
                throttle_capacity=int(throttle.get("capacity", 1000)),
                throttle_refill=float(throttle.get("refillPerSecond", 1000.0)),
                excluded=tuple(gw_spec.get("excluded", ())),
                clock=self.clock,
            ).start()

    def close(self) -> None:
        if self.gateway is not None:
            self.gateway.close()
        if self.aggregator is not None:
            self.aggregator.close()
        for provider in self.providers.values():
            provider.close()

    # -- execution -----------------------------------------------------------

    def run(self) -> ScenarioReport:
        for index, step in enumerate(self.spec.get("steps", [])):
            if not isinstance(step, dict) or len(step) != 1:
                raise ScenarioError(f"step {index} must be a one-key mapping: {step!r}")
            (kind, args), = step.items()
            args = args or {}
            handler = getattr(self, f"_step_{kind}", None)
            if handler is None:
                raise ScenarioError(f"step {index}: unknown step kind {kind!r}")
            handler(args)
            self.report.steps_run += 1
        return self.report

    def _provider(self, name: str) -> SimulatedProvider:
        try:
            return self.providers[name]
        except KeyError:
            raise ScenarioError(f"unknown provider {name!r}") from None

    def _agg(self) -> AggregatorService:
        if self.aggregator is None:
            raise ScenarioError("this scenario has no aggregator")
        return self.aggregator

    # -- steps ---------------------------------------------------------------

    def _step_advance(self, args: dict) -> None:
        self.clock.advance(float(args["seconds"]))

    def _step_harvest(self, args: dict) -> None:
        repository = args.get("repository", "all")
        agg = self._agg()
        names = (
            [r.repository_id for r in agg.registry.all()]
            if repository == "all"
            else [repository]
        )
        self.last_harvests = []
        for name in names:
            self.last_harvests.extend(agg.scheduler.harvest_now(name))

    def _step_tick(self, args: dict) -> None:
        self.last_harvests = self._agg().scheduler.tick()

    def _step_mutate(self, args: dict) -> None:
        provider = self._provider(args["provider"])
        provider.corpus.mutate(args["identifier"], Datestamp(self.clock.now()))

    def _step_delete(self, args: dict) -> None:
        provider = self._provider(args["provider"])
        provider.corpus.delete(args["identifier"], Datestamp(self.clock.now()))

    def _step_kill(self, args: dict) -> None:
        self._provider(args["provider"]).set_down(True)

    def _step_restart(self, args: dict) -> None:
        self._provider(args["provider"]).set_down(False)

    def _step_crashAggregator(self, args: dict) -> None:
        agg = self._agg()
        port = agg.app.port
        page_size = agg.views.page_size
        policy = agg.policy
        agg.close()
        self.aggregator = AggregatorService(
            self.root / "store",
            clock=self.clock,
            policy=policy,
            page_size=page_size,
            port=port,
        ).start()

    def _step_snapshotRequests(self, args: dict) -> None:
        self.snapshots[args["as"]] = self._provider(args["provider"]).request_count

    def _step_assert(self, args: dict) -> None:
        if len(args) != 1:
            raise ScenarioError(f"assert step needs exactly one check: {args!r}")
        (check, params), = args.items()
        params = params or {}
        handler = getattr(self, f"_check_{check}", None)
        if handler is None:
            raise ScenarioError(f"unknown check {check!r}")
        try:
            passed, detail = handler(params)
        except (requests.RequestException, AssertionError) as exc:
            passed, detail = False, f"check errored: {exc}"
        self.report.assertions.append(AssertionResult(check, passed, detail))

    # -- checks --------------------------------------------------------------

    def _view_url(self, view: str) -> str:
        agg = self._agg()
        return agg.oai_url if view in ("aggregated", "", None) else agg.wrapped_url(view)

    def _check_aggregatedCount(self, params: dict) -> tuple[bool, str]:
        records = oracle.harvest(
            self._view_url(params.get("view", "aggregated")),
            params.get("metadataPrefix", "oai_dc"),
        )
        live = sum(1 for r in records.values() if not r.deleted)
        checks: list[tuple[bool, str]] = []
        if "expect" in params:
            want = int(params["expect"])
            checks.append((len(records) == want, f"records: {len(records)}, expected {want}"))
        if "expectLive" in params:
            want = int(params["expectLive"])
            checks.append((live == want, f"live records: {live}, expected {want}"))
        if not checks:
            return False, "nothing to check: give expect and/or expectLive"
        return all(ok for ok, _ in checks), "; ".join(detail for _, detail in checks)

    def _oai_get(self, view: str, query: dict) -> bytes:
        http = requests.get(self._view_url(view), params=query, timeout=30)
        http.raise_for_status()
        return http.content

    @staticmethod
    def _query_of(params: dict) -> dict:
        return {
            k: v
            for k, v in params.items()
            if k not in ("view", "verb", "code")
        } | {"verb": params["verb"]}

    def _check_verbAnswers(self, params: dict) -> tuple[bool, str]:
        body = self._oai_get(params.get("view", "aggregated"), self._query_of(params))
        codes = re.findall(rb'<error code="([^"]+)"', body)
        return not codes, f"error codes: {[c.decode() for c in codes]}"

    def _check_verbError(self, params: dict) -> tuple[bool, str]:
        body = self._oai_get(params.get("view", "aggregated"), self._query_of(params))
        codes = [c.decode() for c in re.findall(rb'<error code="([^"]+)"', body)]
        want = params["code"]
        return want in codes, f"error codes: {codes}, expected {want}"

    def _check_harvestOk(self, params: dict) -> tuple[bool, str]:
        summary = "; ".join(f"{r.repository_id}: {r.reason or 'ok'}" for r in self.last_harvests)
        return bool(self.last_harvests) and all(r.ok for r in self.last_harvests), summary

    def _check_harvestFailed(self, params: dict) -> tuple[bool, str]:
        summary = "; ".join(f"{r.repository_id}: {r.reason or 'ok'}" for r in self.last_harvests)
        return bool(self.last_harvests) and any(not r.ok for r in self.last_harvests), summary

    def _check_requestsUnchanged(self, params: dict) -> tuple[bool, str]:
        provider = self._provider(params["provider"])
        before = self.snapshots.get(params["since"])
        if before is None:
            return False, f"no snapshot named {params['since']!r}"
        now = provider.request_count
        return now == before, f"requests went {before} -> {now}"

    def _check_matchesDirectHarvest(self, params: dict) -> tuple[bool, str]:
        provider = self._provider(params["provider"])
        direct = oracle.harvest(provider.oai_url)
        wrapped = oracle.harvest(self._view_url(provider.config.repository_id))
        missing = sorted(set(direct) - set(wrapped))
        extra = sorted(set(wrapped) - set(direct))
        if missing or extra:
            return False, f"missing: {missing[:3]}, extra: {extra[:3]}"
        if params.get("canonical"):
            for identifier, record in direct.items():
                if record.deleted:
                    continue
                if wrapped[identifier].canonical_metadata != record.canonical_metadata:
                    return False, f"metadata differs for {identifier}"
        return True, f"{len(direct)} records match"

    def _check_servedDatestamp(self, params: dict) -> tuple[bool, str]:
        records = oracle.harvest(
            self._view_url(params.get("view", "aggregated")),
            params.get("metadataPrefix", "oai_dc"),
        )
        record = records.get(params["identifier"])
        if record is None:
            return False, f"{params['identifier']} not served"
        want = params["expect"]
        return record.datestamp == want, f"datestamp {record.datestamp}, expected {want}"

    def _check_originalDatestamp(self, params: dict) -> tuple[bool, str]:
        agg = self._agg()
        entries = agg.store.get(
            (params["identifier"], params.get("metadataPrefix", "oai_dc"))
        )
        if not entries:
            return False, f"{params['identifier']} not stored"
        origins = {e.origin_datestamp()[0].serialize() for e in entries.values()}
        want = params["expect"]
        return origins == {want}, f"origins {sorted(origins)}, expected {want}"

    def _check_gatewayCrawl(self, params: dict) -> tuple[bool, str]:
        if self.gateway is None:
            return False, "this scenario has no gateway"
        repository = params["repository"]
        seen: set[str] = set()
        frontier = [f"/gw/{repository}/index/0"]
        records = 0
        while frontier:
            path = frontier.pop()
            if path in seen:
                continue
            seen.add(path)
            http = requests.get(f"{self.gateway.base_url}{path}", timeout=30)
            if http.status_code != 200:
                return False, f"{path} answered {http.status_code}"
            if "/index/" not in path:
                records += 1
            for href in re.findall(r'href="(/gw/[^"]+)"', http.text):
                if href not in seen:
                    frontier.append(href)
        want = int(params["expectRecords"])
        return records == want, f"crawled {records} record pages, expected {want}"
