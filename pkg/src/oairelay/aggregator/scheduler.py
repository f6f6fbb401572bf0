"""Deciding when each source repository is harvested next.

Every tick runs whatever is due: active repositories get a harvest pass per
metadata format, repositories still pending (unreachable at registration)
get another handshake attempt. A fully successful pass resets the failure
count and schedules the next poll one interval out; any failure doubles the
wait per consecutive failure, capped at a day, so a dead source decays to
one attempt per day instead of hammering.
"""

from __future__ import annotations

import logging
from datetime import timedelta

from oairelay.aggregator.harvest import Harvester, HarvestResult
from oairelay.aggregator.sources import ACTIVE, PENDING, SourceRegistry, SourceRepository
from oairelay.clock import Clock
from oairelay.protocol.datestamp import Datestamp

log = logging.getLogger(__name__)

MAX_BACKOFF_SECONDS = 24 * 3600


class HarvestScheduler:
    def __init__(
        self,
        harvester: Harvester,
        registry: SourceRegistry,
        clock: Clock,
        max_backoff: int = MAX_BACKOFF_SECONDS,
    ):
        self.harvester = harvester
        self.registry = registry
        self.clock = clock
        self.max_backoff = max_backoff

    def backoff_seconds(self, repo: SourceRepository) -> int:
        if repo.failures == 0:
            return repo.poll_interval
        return min(repo.poll_interval * (2**repo.failures), self.max_backoff)

    def is_due(self, repo: SourceRepository) -> bool:
        if repo.status == ACTIVE and not repo.format_prefixes():
            return False
        if repo.next_due is None:
            return True
        now = Datestamp(self.clock.now())
        return Datestamp.parse(repo.next_due).cmp(now) <= 0

    def tick(self) -> list[HarvestResult]:
        """Run everything due right now; returns the harvest results."""
        results: list[HarvestResult] = []
        for repo in self.registry.all():
            if repo.status == PENDING and self.is_due(repo):
                self.registry.handshake(repo)
                if repo.status == PENDING:
                    repo.failures += 1
                    self._reschedule(repo)
                else:
                    repo.failures = 0
                    repo.next_due = None
                self.registry.persist()
            if repo.status == ACTIVE and self.is_due(repo):
                results.extend(self.run_repo(repo))
        return results

    def _reschedule(self, repo: SourceRepository) -> None:
        next_instant = self.clock.now() + timedelta(seconds=self.backoff_seconds(repo))
        repo.next_due = Datestamp(next_instant).serialize()

    def run_repo(self, repo: SourceRepository) -> list[HarvestResult]:
        """Harvest every format of one repository and reschedule it."""
        results = [
            self.harvester.harvest_once(repo, prefix)
            for prefix in repo.format_prefixes()
        ]
        ok = all(r.ok for r in results)
        if ok:
            repo.failures = 0
        else:
            repo.failures += 1
            log.warning(
                "%s: %d consecutive failed harvests, next attempt in %ds",
                repo.repository_id,
                repo.failures,
                self.backoff_seconds(repo),
            )
        self._reschedule(repo)
        self.registry.persist()
        return results

    def harvest_now(self, repository_id: str) -> list[HarvestResult]:
        """Immediate harvest regardless of schedule; unknown id raises KeyError."""
        repo = self.registry.get(repository_id)
        if repo is None:
            raise KeyError(repository_id)
        if repo.status == PENDING:
            self.registry.handshake(repo)
            self.registry.persist()
        if repo.status != ACTIVE:
            detail = f"repository is {repo.status}"
            if repo.status_detail:
                detail += f": {repo.status_detail}"
            return [HarvestResult(repository_id, "", ok=False, reason=detail)]
        return self.run_repo(repo)
