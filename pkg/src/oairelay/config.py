"""One configuration file for the whole relay, validated before anything binds.

The file is YAML with one section per component — ``proxy``, ``aggregator``,
``gateway`` — plus a listen address each. Sections are optional; a file may
describe any subset. Validation is total: every problem in the file is
reported with its path, and nothing starts until the file is clean.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from oairelay.aggregator.collisions import CollisionPolicy
from oairelay.aggregator.sources import BATCH, PER_RECORD
from oairelay.proxy.routes import ProxyRoute


class ConfigError(Exception):
    """One or more problems in the configuration file."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass(frozen=True)
class Listen:
    host: str = "127.0.0.1"
    port: int = 0

    @property
    def client_host(self) -> str:
        """The address a local client should dial (0.0.0.0 is not dialable)."""
        return "127.0.0.1" if self.host in ("0.0.0.0", "::") else self.host

    def url(self, actual_port: int | None = None) -> str:
        return f"http://{self.client_host}:{actual_port or self.port}"


@dataclass(frozen=True)
class ProxyConfig:
    listen: Listen
    prefix: str = "/proxy"
    timeout_seconds: float = 30.0
    report_log: str | None = None
    routes: tuple[ProxyRoute, ...] = ()


@dataclass(frozen=True)
class SourceEntry:
    repository_id: str
    base_url: str
    trust_rank: int
    poll_interval_seconds: int = 3600
    reliability_mode: str = BATCH


@dataclass(frozen=True)
class AggregatorConfig:
    listen: Listen
    storage_dir: str
    repository_name: str = "Aggregating relay"
    admin_email: str = "admin@relay.invalid"
    page_size: int = 100
    tick_seconds: float = 10.0
    policy: CollisionPolicy = field(default_factory=CollisionPolicy)
    repositories: tuple[SourceEntry, ...] = ()

    @property
    def admin_url(self) -> str:
        return self.listen.url()

    @property
    def oai_url(self) -> str:
        return f"{self.listen.url()}/oai"


@dataclass(frozen=True)
class ThrottleConfig:
    capacity: int = 30
    refill_per_second: float = 2.0


@dataclass(frozen=True)
class GatewayConfig:
    listen: Listen
    backing_url: str
    metadata_prefix: str = "oai_dc"
    page_size: int = 50
    throttle: ThrottleConfig = field(default_factory=ThrottleConfig)
    excluded: tuple[str, ...] = ()


@dataclass(frozen=True)
class RelayConfig:
    proxy: ProxyConfig | None = None
    aggregator: AggregatorConfig | None = None
    gateway: GatewayConfig | None = None

    def components(self) -> list[str]:
        return [
            name
            for name in ("proxy", "aggregator", "gateway")
            if getattr(self, name) is not None
        ]


_TOP_KEYS = {"proxy", "aggregator", "gateway"}


def load_config(path: str | Path) -> RelayConfig:
    """Parse and fully validate; raises ConfigError listing every problem."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path} is not valid YAML: {exc}"]) from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return parse_config(raw)


def parse_config(raw: dict) -> RelayConfig:
    problems: list[str] = []
    for key in sorted(set(raw) - _TOP_KEYS):
        problems.append(f"{key}: unknown section")

    proxy = _parse_proxy(raw.get("proxy"), problems)
    aggregator = _parse_aggregator(raw.get("aggregator"), problems)
    gateway = _parse_gateway(raw.get("gateway"), aggregator, problems)

    _check_listen_clashes(
        {"proxy": proxy, "aggregator": aggregator, "gateway": gateway}, problems
    )
    if gateway is not None:
        known = {e.repository_id for e in aggregator.repositories} if aggregator else set()
        for repository_id in gateway.excluded:
            if repository_id not in known:
                problems.append(
                    f"gateway.excluded: {repository_id!r} is not a configured repository"
                )
    if problems:
        raise ConfigError(problems)
    return RelayConfig(proxy=proxy, aggregator=aggregator, gateway=gateway)


def _parse_listen(raw, where: str, problems: list[str]) -> Listen:
    if raw is None:
        return Listen()
    if not isinstance(raw, dict):
        problems.append(f"{where}: must be a mapping with host/port")
        return Listen()
    host = raw.get("host", "127.0.0.1")
    port = raw.get("port", 0)
    if not isinstance(host, str) or not host:
        problems.append(f"{where}.host: must be a non-empty string")
        host = "127.0.0.1"
    if not isinstance(port, int) or not (0 <= port <= 65535):
        problems.append(f"{where}.port: must be an integer in 0..65535")
        port = 0
    return Listen(host, port)


def _parse_proxy(raw, problems: list[str]) -> ProxyConfig | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        problems.append("proxy: must be a mapping")
        return None
    listen = _parse_listen(raw.get("listen"), "proxy.listen", problems)
    routes: list[ProxyRoute] = []
    seen_ids: set[str] = set()
    for index, entry in enumerate(raw.get("routes", []) or []):
        where = f"proxy.routes[{index}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: must be a mapping")
            continue
        repository_id = entry.get("repositoryId", "")
        base_url = entry.get("baseURL", "")
        try:
            route = ProxyRoute(str(repository_id), str(base_url))
        except ValueError as exc:
            problems.append(f"{where}: {exc}")
            continue
        if route.repository_id in seen_ids:
            problems.append(f"{where}.repositoryId: duplicate {route.repository_id!r}")
            continue
        seen_ids.add(route.repository_id)
        routes.append(route)
    timeout = raw.get("timeoutSeconds", 30.0)
    if not isinstance(timeout, (int, float)) or timeout <= 0:
        problems.append("proxy.timeoutSeconds: must be a positive number")
        timeout = 30.0
    return ProxyConfig(
        listen=listen,
        prefix=str(raw.get("prefix", "/proxy")),
        timeout_seconds=float(timeout),
        report_log=raw.get("reportLog"),
        routes=tuple(routes),
    )


def _parse_aggregator(raw, problems: list[str]) -> AggregatorConfig | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        problems.append("aggregator: must be a mapping")
        return None
    listen = _parse_listen(raw.get("listen"), "aggregator.listen", problems)
    storage_dir = raw.get("storageDir")
    if not storage_dir or not isinstance(storage_dir, str):
        problems.append("aggregator.storageDir: required")
        storage_dir = ""
    else:
        path = Path(storage_dir)
        if not path.is_dir():
            problems.append(f"aggregator.storageDir: {storage_dir} does not exist")
        elif not os.access(path, os.W_OK):
            problems.append(f"aggregator.storageDir: {storage_dir} is not writable")

    policy = CollisionPolicy()
    if "policy" in raw:
        try:
            policy = CollisionPolicy.from_config(raw["policy"])
        except (ValueError, TypeError) as exc:
            problems.append(f"aggregator.policy: {exc}")

    repositories: list[SourceEntry] = []
    seen_ids: set[str] = set()
    seen_ranks: dict[int, str] = {}
    for index, entry in enumerate(raw.get("repositories", []) or []):
        where = f"aggregator.repositories[{index}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: must be a mapping")
            continue
        repository_id = str(entry.get("repositoryId", ""))
        base_url = str(entry.get("baseURL", ""))
        if not repository_id:
            problems.append(f"{where}.repositoryId: required")
            continue
        if not base_url:
            problems.append(f"{where}.baseURL: required")
            continue
        try:
            trust_rank = int(entry["trustRank"])
        except (KeyError, TypeError, ValueError):
            problems.append(f"{where}.trustRank: required integer")
            continue
        mode = entry.get("reliabilityMode", BATCH)
        if mode not in (BATCH, PER_RECORD):
            problems.append(
                f"{where}.reliabilityMode: {mode!r} is not {BATCH!r} or {PER_RECORD!r}"
            )
            continue
        if repository_id in seen_ids:
            problems.append(f"{where}.repositoryId: duplicate {repository_id!r}")
            continue
        if trust_rank in seen_ranks:
            problems.append(
                f"{where}.trustRank: {trust_rank} already used by"
                f" {seen_ranks[trust_rank]!r}"
            )
            continue
        seen_ids.add(repository_id)
        seen_ranks[trust_rank] = repository_id
        try:
            poll = int(entry.get("pollIntervalSeconds", 3600))
        except (TypeError, ValueError):
            problems.append(f"{where}.pollIntervalSeconds: must be an integer")
            continue
        repositories.append(
            SourceEntry(repository_id, base_url, trust_rank, poll, mode)
        )

    page_size = raw.get("pageSize", 100)
    if not isinstance(page_size, int) or page_size < 1:
        problems.append("aggregator.pageSize: must be a positive integer")
        page_size = 100
    tick = raw.get("tickSeconds", 10.0)
    if not isinstance(tick, (int, float)) or tick <= 0:
        problems.append("aggregator.tickSeconds: must be a positive number")
        tick = 10.0
    return AggregatorConfig(
        listen=listen,
        storage_dir=str(storage_dir),
        repository_name=str(raw.get("repositoryName", "Aggregating relay")),
        admin_email=str(raw.get("adminEmail", "admin@relay.invalid")),
        page_size=page_size,
        tick_seconds=float(tick),
        policy=policy,
        repositories=tuple(repositories),
    )


def _parse_gateway(raw, aggregator: AggregatorConfig | None, problems: list[str]) -> GatewayConfig | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        problems.append("gateway: must be a mapping")
        return None
    listen = _parse_listen(raw.get("listen"), "gateway.listen", problems)
    backing = raw.get("backingUrl")
    if not backing:
        if aggregator is None:
            problems.append(
                "gateway.backingUrl: required when there is no aggregator section"
            )
            backing = ""
        else:
            backing = aggregator.oai_url
    throttle_raw = raw.get("throttle", {}) or {}
    capacity = throttle_raw.get("capacity", 30)
    refill = throttle_raw.get("refillPerSecond", 2.0)
    if not isinstance(capacity, int) or capacity < 1:
        problems.append("gateway.throttle.capacity: must be a positive integer")
        capacity = 30
    if not isinstance(refill, (int, float)) or refill <= 0:
        problems.append("gateway.throttle.refillPerSecond: must be a positive number")
        refill = 2.0
    page_size = raw.get("pageSize", 50)
    if not isinstance(page_size, int) or page_size < 1:
        problems.append("gateway.pageSize: must be a positive integer")
        page_size = 50
    return GatewayConfig(
        listen=listen,
        backing_url=str(backing),
        metadata_prefix=str(raw.get("metadataPrefix", "oai_dc")),
        page_size=page_size,
        throttle=ThrottleConfig(capacity, float(refill)),
        excluded=tuple(str(x) for x in raw.get("excluded", []) or []),
    )


def _check_listen_clashes(sections: dict, problems: list[str]) -> None:
    taken: dict[tuple[str, int], str] = {}
    for name, section in sections.items():
        if section is None or section.listen.port == 0:
            continue
        key = (section.listen.host, section.listen.port)
        if key in taken:
            problems.append(
                f"{name}.listen: {key[0]}:{key[1]} already used by {taken[key]}"
            )
        else:
            taken[key] = name
