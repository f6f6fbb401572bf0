"""relayctl — run and operate the relay components from one config file.

Subcommands:

- ``run [proxy|aggregator|gateway|all]`` — start the selected daemons and
  block until interrupted; shutdown is clean (stores flushed, sockets
  closed).
- ``harvest-now REPOSITORY_ID`` — ask the running aggregator to harvest one
  repository immediately and print the ingest summary.
- ``status`` — show the running aggregator's repository table; read-only.
- ``validate-config`` — parse and validate the config file, then exit.

Exit codes: 0 success, 1 runtime error (daemon unreachable, unknown
repository, failed harvest), 2 configuration error. ``harvest-now`` and
``status`` talk to the daemons over their admin HTTP endpoints; they never
touch the store files directly.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import threading
import time

import requests

from oairelay.aggregator.service import AggregatorService
from oairelay.aggregator.sources import RegistrationError
from oairelay.config import ConfigError, RelayConfig, load_config
from oairelay.gateway.server import GatewayService
from oairelay.proxy.routes import RoutingTable
from oairelay.proxy.server import RepairProxy

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

_COMPONENTS = ("proxy", "aggregator", "gateway")


class RunningRelay:
    """The set of started daemons for one ``run`` invocation."""

    def __init__(self):
        self.proxy: RepairProxy | None = None
        self.aggregator: AggregatorService | None = None
        self.gateway: GatewayService | None = None

    def close(self) -> None:
        # Stop front-to-back so nothing serves from a closing backend.
        for service in (self.gateway, self.proxy, self.aggregator):
            if service is not None:
                service.close()
        if self.aggregator is not None:
            self.aggregator.registry.persist()

    def __enter__(self) -> "RunningRelay":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def start_components(config: RelayConfig, which: str = "all") -> RunningRelay:
    """Start the requested daemons; raises ConfigError if a section is missing."""
    wanted = list(_COMPONENTS) if which == "all" else [which]
    missing = [name for name in wanted if getattr(config, name) is None]
    if which == "all":
        wanted = [name for name in wanted if getattr(config, name) is not None]
        if not wanted:
            raise ConfigError(["no components configured"])
    elif missing:
        raise ConfigError([f"{name}: section missing from config" for name in missing])

    relay = RunningRelay()
    try:
        if "aggregator" in wanted:
            agg = config.aggregator
            relay.aggregator = AggregatorService(
                agg.storage_dir,
                policy=agg.policy,
                repository_name=agg.repository_name,
                admin_email=agg.admin_email,
                page_size=agg.page_size,
                host=agg.listen.host,
                port=agg.listen.port,
            )
            relay.aggregator.start(tick_interval=agg.tick_seconds)
            _seed_repositories(relay.aggregator, agg)
        if "proxy" in wanted:
            prx = config.proxy
            relay.proxy = RepairProxy(
                RoutingTable(list(prx.routes), prefix=prx.prefix),
                timeout=prx.timeout_seconds,
                report_log_path=prx.report_log,
                host=prx.listen.host,
                port=prx.listen.port,
            ).start()
        if "gateway" in wanted:
            gw = config.gateway
            backing = gw.backing_url
            if relay.aggregator is not None and config.aggregator is not None:
                if backing == config.aggregator.oai_url:
                    # The section derived its backing URL from the aggregator
                    # listen address; prefer the actually bound one (port 0
                    # becomes a real port only at bind time).
                    backing = relay.aggregator.oai_url
            relay.gateway = GatewayService(
                backing,
                metadata_prefix=gw.metadata_prefix,
                page_size=gw.page_size,
                throttle_capacity=gw.throttle.capacity,
                throttle_refill=gw.throttle.refill_per_second,
                excluded=gw.excluded,
                host=gw.listen.host,
                port=gw.listen.port,
            ).start()
    except Exception:
        relay.close()
        raise
    return relay


def _seed_repositories(service: AggregatorService, agg) -> None:
    """Register configured repositories that are not in the store yet."""
    for entry in agg.repositories:
        if service.registry.get(entry.repository_id) is not None:
            continue
        try:
            service.registry.add(
                entry.repository_id,
                entry.base_url,
                entry.trust_rank,
                poll_interval=entry.poll_interval_seconds,
                reliability_mode=entry.reliability_mode,
            )
        except RegistrationError as exc:
            print(f"warning: {entry.repository_id}: {exc}", file=sys.stderr)


# -- subcommands --------------------------------------------------------------


def cmd_run(config: RelayConfig, args) -> int:
    try:
        relay = start_components(config, args.component)
    except ConfigError as exc:
        _print_problems(exc)
        return EXIT_CONFIG
    stop = threading.Event()

    def _interrupt(signum, frame):
        stop.set()

    # Handlers go in before the listening lines come out: once a supervisor
    # sees a line, a signal must already shut us down cleanly.
    previous = {}
    for signum in (signal.SIGINT, signal.SIGTERM):
        previous[signum] = signal.signal(signum, _interrupt)
    # Flush each line right away so a supervisor reading a pipe can use
    # them as readiness signals.
    if relay.aggregator is not None:
        print(f"aggregator listening on {relay.aggregator.oai_url}", flush=True)
    if relay.proxy is not None:
        print(
            f"proxy listening on {relay.proxy.base_url}{relay.proxy.table.prefix}",
            flush=True,
        )
    if relay.gateway is not None:
        print(f"gateway listening on {relay.gateway.base_url}/gw", flush=True)
    try:
        stop.wait()
    finally:
        for signum, handler in previous.items():
            signal.signal(signum, handler)
        relay.close()
        print("shut down cleanly", flush=True)
    return EXIT_OK


def cmd_harvest_now(config: RelayConfig, args) -> int:
    if config.aggregator is None:
        _print_problems(ConfigError(["aggregator: section missing from config"]))
        return EXIT_CONFIG
    admin = config.aggregator.admin_url
    started = time.monotonic()
    try:
        response = requests.post(
            f"{admin}/admin/harvest",
            json={"repositoryId": args.repository_id},
            timeout=args.timeout,
        )
    except requests.exceptions.RequestException as exc:
        print(f"aggregator unreachable at {admin}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    elapsed = time.monotonic() - started
    if response.status_code == 404:
        print(f"unknown repository: {args.repository_id}", file=sys.stderr)
        return EXIT_RUNTIME
    if response.status_code != 200:
        print(
            f"harvest request failed: HTTP {response.status_code}: "
            f"{response.text.strip()}",
            file=sys.stderr,
        )
        return EXIT_RUNTIME
    report = response.json()
    report["elapsedSeconds"] = round(elapsed, 3)
    if args.format == "json":
        print(json.dumps(report, indent=2, sort_keys=True))
        return EXIT_OK if report.get("ok") else EXIT_RUNTIME

    harvests = report.get("harvests", [])
    totals = {
        key: sum(h.get(key, 0) for h in harvests)
        for key in ("ingested", "discarded", "dropped", "rejected")
    }
    print(
        f"{args.repository_id}: ingested {totals['ingested']}, "
        f"collided {totals['discarded']}, dropped {totals['dropped']} "
        f"({elapsed:.2f}s)"
    )
    for harvest in harvests:
        if not harvest.get("ok"):
            print(
                f"  {harvest.get('metadataPrefix') or '-'}: "
                f"FAILED: {harvest.get('reason')}",
                file=sys.stderr,
            )
    if not report.get("ok"):
        repo = report.get("repository") or {}
        next_due = repo.get("nextDue")
        if next_due:
            print(f"  next attempt due {next_due}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_status(config: RelayConfig, args) -> int:
    if config.aggregator is None:
        _print_problems(ConfigError(["aggregator: section missing from config"]))
        return EXIT_CONFIG
    admin = config.aggregator.admin_url
    try:
        response = requests.get(f"{admin}/admin/status", timeout=args.timeout)
        response.raise_for_status()
    except requests.exceptions.RequestException as exc:
        print(f"aggregator unreachable at {admin}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    status = response.json()
    if args.format == "json":
        print(json.dumps(status, indent=2, sort_keys=True))
        return EXIT_OK
    print(
        f"records: {status.get('records', 0)}  "
        f"identifiers: {status.get('identifiers', 0)}  "
        f"generation: {status.get('generation', 0)}"
    )
    rows = [["REPOSITORY", "STATUS", "TRUST", "RECORDS", "FAILURES", "NEXT-DUE"]]
    for repo in status.get("repositories", []):
        rows.append(
            [
                str(repo.get("repositoryId", "")),
                str(repo.get("status", "")),
                str(repo.get("trustRank", "")),
                str(repo.get("storedRecords", 0)),
                str(repo.get("failures", 0)),
                str(repo.get("nextDue") or "-"),
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    for row in rows:
        print("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
    return EXIT_OK


def cmd_validate_config(config: RelayConfig, args) -> int:
    components = config.components()
    print(f"configuration OK ({', '.join(components) or 'no components'})")
    return EXIT_OK


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relayctl",
        description="Operate the repair proxy, aggregator and crawler gateway.",
    )
    parser.add_argument(
        "-c", "--config", required=True, help="path to the YAML config file"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="start daemons and block until interrupted")
    p_run.add_argument(
        "component",
        nargs="?",
        default="all",
        choices=("proxy", "aggregator", "gateway", "all"),
    )
    p_run.set_defaults(func=cmd_run)

    p_harvest = sub.add_parser(
        "harvest-now", help="harvest one repository immediately"
    )
    p_harvest.add_argument("repository_id")
    p_harvest.add_argument("--format", choices=("text", "json"), default="text")
    p_harvest.add_argument("--timeout", type=float, default=300.0)
    p_harvest.set_defaults(func=cmd_harvest_now)

    p_status = sub.add_parser("status", help="show the aggregator's repositories")
    p_status.add_argument("--format", choices=("text", "json"), default="text")
    p_status.add_argument("--timeout", type=float, default=10.0)
    p_status.set_defaults(func=cmd_status)

    p_validate = sub.add_parser("validate-config", help="check the config file")
    p_validate.set_defaults(func=cmd_validate_config)
    return parser


def _print_problems(exc: ConfigError) -> None:
    print("configuration error:", file=sys.stderr)
    for problem in exc.problems:
        print(f"  {problem}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        _print_problems(exc)
        return EXIT_CONFIG
    return args.func(config, args)


if __name__ == "__main__":
    sys.exit(main())
