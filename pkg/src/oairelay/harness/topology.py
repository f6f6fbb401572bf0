"""Wiring simulated providers and aggregators into harvest topologies.

The diamond is the interesting shape: three source repositories a, b, x
feed two mid-tier aggregators — one sees a+x, the other b+x — and both
mid-tiers feed one downstream aggregator. Records of x reach the bottom on
two paths, so the downstream sees the same identifier from two different
sources and has to resolve the collision.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from oairelay.aggregator.collisions import CollisionPolicy
from oairelay.aggregator.service import AggregatorService
from oairelay.clock import Clock, SimClock
from oairelay.harness.simdp import SimDpConfig, SimulatedProvider, spawn_sim_dp


@dataclass
class Diamond:
    clock: Clock
    providers: dict[str, SimulatedProvider]
    mids: dict[str, AggregatorService]
    top: AggregatorService
    storage_root: Path
    closed: bool = field(default=False)

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        self.top.close()
        for mid in self.mids.values():
            mid.close()
        for provider in self.providers.values():
            provider.close()

    def __enter__(self) -> "Diamond":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def harvest_mids(self) -> None:
        """One harvest pass of every source into both mid-tier aggregators."""
        for mid in self.mids.values():
            for repo in mid.registry.all():
                mid.scheduler.harvest_now(repo.repository_id)

    def harvest_top(self, order: tuple[str, str] = ("ax", "bx")) -> None:
        """One harvest pass of the mid-tiers into the downstream, in order."""
        for mid_name in order:
            self.top.scheduler.harvest_now(mid_name)


def build_diamond(
    clock: Clock | None = None,
    *,
    records_per_repo: int = 50,
    page_size: int = 25,
    policy: CollisionPolicy | None = None,
    storage_root: str | Path | None = None,
    seed: int = 0,
) -> Diamond:
    """Three sources, two mid-tier aggregators (a+x / b+x), one downstream."""
    clock = clock or SimClock()
    root = Path(storage_root) if storage_root else Path(tempfile.mkdtemp(prefix="diamond-"))
    root.mkdir(parents=True, exist_ok=True)
    policy = policy or CollisionPolicy()

    providers = {
        name: spawn_sim_dp(
            SimDpConfig(name, record_count=records_per_repo, page_size=page_size, seed=seed),
            clock,
        )
        for name in ("a", "b", "x")
    }

    mids: dict[str, AggregatorService] = {}
    for mid_name, sources in (("ax", ("a", "x")), ("bx", ("b", "x"))):
        mid = AggregatorService(
            root / mid_name,
            clock=clock,
            policy=policy,
            repository_name=f"mid-tier {mid_name}",
        ).start()
        for rank, source in enumerate(sources, start=1):
            mid.registry.add(source, providers[source].oai_url, rank)
        mids[mid_name] = mid

    top = AggregatorService(
        root / "top", clock=clock, policy=policy, repository_name="downstream"
    ).start()
    top.registry.add("ax", mids["ax"].oai_url, 1)
    top.registry.add("bx", mids["bx"].oai_url, 2)

    return Diamond(clock, providers, mids, top, root)
