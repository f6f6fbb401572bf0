"""Harvesting aggregator-cache: ingest, store, collision handling, re-export."""

from oairelay.aggregator.collisions import (
    KEEP_BOTH,
    KEEP_EXISTING,
    REPLACE,
    CollisionPolicy,
    resolve_collision,
    trust_winner,
)
from oairelay.aggregator.harvest import Harvester, HarvestResult
from oairelay.aggregator.scheduler import HarvestScheduler
from oairelay.aggregator.serve import AGGREGATED, UnknownView, ViewServer
from oairelay.aggregator.service import AggregatorService
from oairelay.aggregator.sources import (
    ACTIVE,
    PENDING,
    REJECTED,
    RegistrationError,
    SourceRegistry,
    SourceRepository,
)
from oairelay.aggregator.store import RecordStore, StoredRecord

__all__ = [
    "ACTIVE",
    "AGGREGATED",
    "AggregatorService",
    "CollisionPolicy",
    "Harvester",
    "HarvestResult",
    "HarvestScheduler",
    "KEEP_BOTH",
    "KEEP_EXISTING",
    "PENDING",
    "REJECTED",
    "REPLACE",
    "RecordStore",
    "RegistrationError",
    "SourceRegistry",
    "SourceRepository",
    "StoredRecord",
    "UnknownView",
    "ViewServer",
    "resolve_collision",
    "trust_winner",
]
