"""Harvesting into the store: ingest, drops, watermarks, provenance, collisions."""

from datetime import datetime, timezone

import pytest

from oairelay.aggregator.collisions import CollisionPolicy
from oairelay.aggregator.harvest import Harvester
from oairelay.aggregator.sources import PER_RECORD, SourceRegistry
from oairelay.aggregator.store import RecordStore
from oairelay.clock import SimClock
from oairelay.harness.faults import FaultSpec
from oairelay.harness.simdp import SimDpConfig, spawn_sim_dp
from oairelay.protocol.datestamp import Datestamp


@pytest.fixture
def clock():
    return SimClock(datetime(2024, 5, 1, tzinfo=timezone.utc))


def make_harvester(tmp_path, clock):
    store = RecordStore(tmp_path / "store")
    registry = SourceRegistry(store, clock, timeout=5)
    return Harvester(store, registry, CollisionPolicy(), clock, timeout=5)


def spawn(clock, **overrides):
    config = SimDpConfig(
        repository_id=overrides.pop("repository_id", "alpha"),
        record_count=overrides.pop("record_count", 12),
        page_size=overrides.pop("page_size", 5),
        **overrides,
    )
    return spawn_sim_dp(config, clock)


class TestBatchHarvest:
    def test_full_harvest_ingests_every_record(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(clock)
        try:
            repo = harvester.registry.add("alpha", dp.oai_url, trust_rank=1)
            result = harvester.harvest_once(repo, "oai_dc")
        finally:
            dp.close()
        assert result.ok
        assert result.ingested == 12
        assert result.pages == 3
        assert harvester.store.record_count() == 12

    def test_served_datestamp_is_ingestion_instant(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(clock)
        try:
            repo = harvester.registry.add("alpha", dp.oai_url, trust_rank=1)
            harvester.harvest_once(repo, "oai_dc")
        finally:
            dp.close()
        now = Datestamp(clock.now())
        for entries in harvester.store.entries().values():
            for entry in entries.values():
                assert entry.local_datestamp == now
                assert entry.original_datestamp != now or entry.deleted

    def test_provenance_recovers_source_datestamp(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(clock)
        try:
            repo = harvester.registry.add("alpha", dp.oai_url, trust_rank=1)
            harvester.harvest_once(repo, "oai_dc")
            corpus_stamps = {
                r.identifier: r.datestamp for r in dp.corpus.ordered()
            }
        finally:
            dp.close()
        for (identifier, _), entries in harvester.store.entries().items():
            for entry in entries.values():
                origin, had = entry.origin_datestamp()
                assert had
                assert origin == corpus_stamps[identifier]

    def test_repeat_harvest_ingests_nothing(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(clock)
        try:
            repo = harvester.registry.add("alpha", dp.oai_url, trust_rank=1)
            harvester.harvest_once(repo, "oai_dc")
            again = harvester.harvest_once(repo, "oai_dc")
        finally:
            dp.close()
        assert again.ok
        assert again.ingested == 0

    def test_incremental_harvest_picks_up_mutation(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(clock)
        try:
            repo = harvester.registry.add("alpha", dp.oai_url, trust_rank=1)
            harvester.harvest_once(repo, "oai_dc")
            clock.advance(3600)
            target = dp.corpus.by_index(4).identifier
            dp.corpus.mutate(target, Datestamp(clock.now()))
            clock.advance(60)
            result = harvester.harvest_once(repo, "oai_dc")
        finally:
            dp.close()
        assert result.ingested == 1
        (entry,) = harvester.store.get((target, "oai_dc")).values()
        assert entry.original_datestamp == Datestamp.parse("2024-05-01T01:00:00Z")

    def test_deleted_record_ingested_as_deletion(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(clock)
        try:
            repo = harvester.registry.add("alpha", dp.oai_url, trust_rank=1)
            harvester.harvest_once(repo, "oai_dc")
            clock.advance(3600)
            target = dp.corpus.by_index(0).identifier
            dp.corpus.delete(target, Datestamp(clock.now()))
            clock.advance(60)
            result = harvester.harvest_once(repo, "oai_dc")
        finally:
            dp.close()
        assert result.ingested == 1
        (entry,) = harvester.store.get((target, "oai_dc")).values()
        assert entry.deleted

    def test_generation_bumps_only_when_content_changes(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(clock)
        try:
            repo = harvester.registry.add("alpha", dp.oai_url, trust_rank=1)
            harvester.harvest_once(repo, "oai_dc")
            first = harvester.store.generation
            harvester.harvest_once(repo, "oai_dc")
            second = harvester.store.generation
        finally:
            dp.close()
        assert first == 1
        assert second == 1


class TestFaultyHarvest:
    def test_unrepairable_records_dropped_not_fatal(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(
            clock,
            record_count=20,
            faults=(FaultSpec("WrongSchemaUri", rate=0.2, seed=3),),
        )
        try:
            repo = harvester.registry.add("alpha", dp.oai_url, trust_rank=1)
            result = harvester.harvest_once(repo, "oai_dc")
            doomed = dp.unrepairable_identifiers()
        finally:
            dp.close()
        assert result.ok
        assert result.dropped == len(doomed) == 4
        stored = {identifier for identifier, _ in harvester.store.keys()}
        assert stored.isdisjoint(doomed)
        assert result.ingested == 20 - len(doomed)

    def test_repairable_faults_ingested_with_alteration_flag(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(
            clock,
            record_count=20,
            faults=(FaultSpec("BareAmpersand", rate=0.2, seed=5),),
        )
        try:
            repo = harvester.registry.add("alpha", dp.oai_url, trust_rank=1)
            result = harvester.harvest_once(repo, "oai_dc")
            damaged = set(dp.damaged_identifiers())
        finally:
            dp.close()
        assert result.ok
        assert result.ingested == 20
        assert set(result.altered_identifiers) == damaged
        for identifier in damaged:
            (entry,) = harvester.store.get((identifier, "oai_dc")).values()
            assert entry.provenance().altered

    def test_unreachable_provider_fails_pass_keeps_watermark(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(clock)
        try:
            repo = harvester.registry.add("alpha", dp.oai_url, trust_rank=1)
        finally:
            dp.close()
        result = harvester.harvest_once(repo, "oai_dc")
        assert not result.ok
        assert "unreachable" in result.reason
        assert repo.watermark("oai_dc") is None

    def test_mid_pass_outage_keeps_ingested_but_not_watermark(self, tmp_path, clock):
        import requests

        class OutageAfter(requests.Session):
            """Kills the provider once the allowed number of requests is spent."""

            def __init__(self, provider, allowed):
                super().__init__()
                self.provider = provider
                self.remaining = allowed

            def get(self, *args, **kwargs):
                if self.remaining == 0:
                    self.provider.set_down(True)
                self.remaining -= 1
                return super().get(*args, **kwargs)

        store = RecordStore(tmp_path / "store")
        registry = SourceRegistry(store, clock, timeout=5)
        dp = spawn(clock, record_count=12, page_size=5)
        harvester = Harvester(
            store,
            registry,
            CollisionPolicy(),
            clock,
            session=OutageAfter(dp, allowed=1),
            timeout=5,
        )
        try:
            repo = registry.add("alpha", dp.oai_url, trust_rank=1)
            result = harvester.harvest_once(repo, "oai_dc")
        finally:
            dp.close()
        assert not result.ok
        assert repo.watermark("oai_dc") is None
        assert store.record_count() == 5


class TestPerRecordHarvest:
    def test_per_record_mode_fetches_each_record(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(clock, record_count=8)
        try:
            repo = harvester.registry.add(
                "alpha", dp.oai_url, trust_rank=1, reliability_mode=PER_RECORD
            )
            stats_before = dp.stats.by_verb.copy()
            result = harvester.harvest_once(repo, "oai_dc")
            get_calls = dp.stats.by_verb.get("GetRecord", 0) - stats_before.get(
                "GetRecord", 0
            )
        finally:
            dp.close()
        assert result.ok
        assert result.ingested == 8
        assert get_calls == 8

    def test_per_record_drops_only_the_doomed_record(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(
            clock,
            record_count=10,
            faults=(FaultSpec("WrongSchemaUri", rate=0.1, seed=2),),
        )
        try:
            repo = harvester.registry.add(
                "alpha", dp.oai_url, trust_rank=1, reliability_mode=PER_RECORD
            )
            result = harvester.harvest_once(repo, "oai_dc")
            doomed = dp.unrepairable_identifiers()
        finally:
            dp.close()
        assert result.ok
        assert result.dropped == len(doomed) == 1
        assert result.ingested == 9

    def test_per_record_ingests_deletions(self, tmp_path, clock):
        harvester = make_harvester(tmp_path, clock)
        dp = spawn(clock, record_count=6)
        try:
            repo = harvester.registry.add(
                "alpha", dp.oai_url, trust_rank=1, reliability_mode=PER_RECORD
            )
            target = dp.corpus.by_index(2).identifier
            dp.corpus.delete(target, Datestamp(clock.now()))
            result = harvester.harvest_once(repo, "oai_dc")
        finally:
            dp.close()
        assert result.ok
        assert result.ingested == 6
        (entry,) = harvester.store.get((target, "oai_dc")).values()
        assert entry.deleted


class TestCollisionsAtIngest:
    def two_source_setup(self, tmp_path, clock, policy):
        store = RecordStore(tmp_path / "store")
        registry = SourceRegistry(store, clock, timeout=5)
        harvester = Harvester(store, registry, policy, clock, timeout=5)
        shared_a = spawn_sim_dp(
            SimDpConfig(repository_id="shared", record_count=5, seed=1), clock
        )
        shared_b = spawn_sim_dp(
            SimDpConfig(repository_id="shared", record_count=5, seed=2), clock
        )
        return harvester, registry, shared_a, shared_b

    def test_trusted_source_keeps_better_rank(self, tmp_path, clock):
        policy = CollisionPolicy(rules=("TrustedSource",), fallback="keepExisting")
        harvester, registry, dp_a, dp_b = self.two_source_setup(tmp_path, clock, policy)
        try:
            worse = registry.add("worse", dp_b.oai_url, trust_rank=2)
            better = registry.add("better", dp_a.oai_url, trust_rank=1)
            harvester.harvest_once(worse, "oai_dc")
            result = harvester.harvest_once(better, "oai_dc")
        finally:
            dp_a.close()
            dp_b.close()
        assert result.ingested == 5
        for entries in harvester.store.entries().values():
            assert set(entries) == {"better"}

    def test_trusted_source_discards_worse_rank(self, tmp_path, clock):
        policy = CollisionPolicy(rules=("TrustedSource",), fallback="keepExisting")
        harvester, registry, dp_a, dp_b = self.two_source_setup(tmp_path, clock, policy)
        try:
            better = registry.add("better", dp_a.oai_url, trust_rank=1)
            worse = registry.add("worse", dp_b.oai_url, trust_rank=2)
            harvester.harvest_once(better, "oai_dc")
            result = harvester.harvest_once(worse, "oai_dc")
        finally:
            dp_a.close()
            dp_b.close()
        assert result.ingested == 0
        assert result.discarded == 5
        for entries in harvester.store.entries().values():
            assert set(entries) == {"better"}

    def test_keep_both_stores_both_sources(self, tmp_path, clock):
        policy = CollisionPolicy(rules=(), fallback="keepBoth")
        harvester, registry, dp_a, dp_b = self.two_source_setup(tmp_path, clock, policy)
        try:
            first = registry.add("first", dp_a.oai_url, trust_rank=1)
            second = registry.add("second", dp_b.oai_url, trust_rank=2)
            harvester.harvest_once(first, "oai_dc")
            harvester.harvest_once(second, "oai_dc")
        finally:
            dp_a.close()
            dp_b.close()
        assert harvester.store.record_count() == 10
        assert harvester.store.key_count() == 5
