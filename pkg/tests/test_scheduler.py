"""Polling scheduler: due times, exponential backoff, handshake retries."""

from datetime import datetime, timezone

import pytest

from oairelay.aggregator.collisions import CollisionPolicy
from oairelay.aggregator.harvest import Harvester
from oairelay.aggregator.scheduler import HarvestScheduler
from oairelay.aggregator.sources import ACTIVE, PENDING, SourceRegistry
from oairelay.aggregator.store import RecordStore
from oairelay.clock import SimClock
from oairelay.harness.simdp import SimDpConfig, spawn_sim_dp


@pytest.fixture
def clock():
    return SimClock(datetime(2024, 5, 1, tzinfo=timezone.utc))


@pytest.fixture
def scheduler(tmp_path, clock):
    store = RecordStore(tmp_path / "store")
    registry = SourceRegistry(store, clock, timeout=5)
    harvester = Harvester(store, registry, CollisionPolicy(), clock, timeout=5)
    return HarvestScheduler(harvester, registry, clock)


@pytest.fixture
def provider(clock):
    dp = spawn_sim_dp(
        SimDpConfig(repository_id="alpha", record_count=6, page_size=10), clock
    )
    yield dp
    dp.close()


class TestBackoffArithmetic:
    def test_no_failures_waits_one_poll_interval(self, scheduler, provider):
        repo = scheduler.registry.add(
            "alpha", provider.oai_url, trust_rank=1, poll_interval=600
        )
        assert scheduler.backoff_seconds(repo) == 600

    def test_three_failures_waits_eight_intervals(self, scheduler, provider):
        repo = scheduler.registry.add(
            "alpha", provider.oai_url, trust_rank=1, poll_interval=600
        )
        repo.failures = 3
        assert scheduler.backoff_seconds(repo) == 600 * 8

    def test_backoff_capped(self, scheduler, provider):
        repo = scheduler.registry.add(
            "alpha", provider.oai_url, trust_rank=1, poll_interval=3600
        )
        repo.failures = 20
        assert scheduler.backoff_seconds(repo) == scheduler.max_backoff


class TestTicking:
    def test_tick_harvests_due_repo(self, scheduler, provider):
        scheduler.registry.add("alpha", provider.oai_url, trust_rank=1)
        scheduler.tick()
        assert scheduler.harvester.store.record_count() == 6

    def test_repo_not_due_again_until_interval_elapses(self, scheduler, provider,
                                                       clock):
        scheduler.registry.add(
            "alpha", provider.oai_url, trust_rank=1, poll_interval=600
        )
        scheduler.tick()
        before = provider.request_count
        scheduler.tick()
        assert provider.request_count == before
        clock.advance(601)
        scheduler.tick()
        assert provider.request_count > before

    def test_failed_harvest_backs_off_exponentially(self, scheduler, clock, provider):
        repo = scheduler.registry.add(
            "alpha", provider.oai_url, trust_rank=1, poll_interval=600
        )
        provider.set_down(True)
        clock.advance(601)
        scheduler.tick()
        assert repo.failures == 1
        first_due = repo.next_due
        clock.advance(600 * 2 + 1)
        scheduler.tick()
        assert repo.failures == 2
        assert repo.next_due > first_due
        provider.set_down(False)
        clock.advance(600 * 4 + 1)
        scheduler.tick()
        assert repo.failures == 0

    def test_pending_repo_retries_handshake_with_backoff(self, scheduler, clock):
        repo = scheduler.registry.add(
            "down", "http://127.0.0.1:9/oai", trust_rank=1, poll_interval=600
        )
        assert repo.status == PENDING
        scheduler.tick()
        assert repo.failures == 1
        before = repo.failures
        scheduler.tick()
        assert repo.failures == before
        dp = spawn_sim_dp(
            SimDpConfig(repository_id="down", record_count=4, page_size=10), clock
        )
        try:
            repo.base_url = dp.oai_url
            clock.advance(600 * 2 + 1)
            scheduler.tick()
            assert repo.status == ACTIVE
            clock.advance(601)
            scheduler.tick()
            assert scheduler.harvester.store.record_count() == 4
        finally:
            dp.close()


class TestHarvestNow:
    def test_unknown_repository_raises(self, scheduler):
        with pytest.raises(KeyError):
            scheduler.harvest_now("ghost")

    def test_harvests_immediately_even_if_not_due(self, scheduler, provider, clock):
        scheduler.registry.add(
            "alpha", provider.oai_url, trust_rank=1, poll_interval=600
        )
        scheduler.tick()
        results = scheduler.harvest_now("alpha")
        assert all(r.ok for r in results)

    def test_pending_repo_reports_failure(self, scheduler):
        scheduler.registry.add("down", "http://127.0.0.1:9/oai", trust_rank=1)
        results = scheduler.harvest_now("down")
        assert len(results) == 1
        assert not results[0].ok
        assert "pending" in results[0].reason
