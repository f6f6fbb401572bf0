"""Source repository registry: registration handshake and persisted metadata.

Registering a repository performs the upstream handshake — Identify (stored
whole, so its data policies can be replayed on the wrapped view) and
ListMetadataFormats. A repository that speaks 1.x or violates the envelope
fatally is rejected; one that is merely unreachable stays pending and is
retried by the scheduler.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

import requests

from oairelay.clock import Clock
from oairelay.protocol.datestamp import Datestamp
from oairelay.protocol.model import (
    FormatsPayload,
    IdentifyInfo,
    IdentifyPayload,
    MetadataFormat,
)
from oairelay.protocol.parse import parse_response

log = logging.getLogger(__name__)

ACTIVE = "active"
PENDING = "pending"
REJECTED = "rejected"

BATCH = "batch"
PER_RECORD = "perRecord"


@dataclass
class SourceRepository:
    repository_id: str
    base_url: str
    trust_rank: int
    poll_interval: int = 3600
    reliability_mode: str = BATCH
    status: str = PENDING
    status_detail: str = ""
    identify: IdentifyInfo | None = None
    formats: list[MetadataFormat] = field(default_factory=list)
    #: metadataPrefix -> serialized watermark datestamp
    last_harvest: dict[str, str] = field(default_factory=dict)
    failures: int = 0
    #: serialized instant before which no new harvest is attempted
    next_due: str | None = None

    def __post_init__(self):
        if self.reliability_mode not in (BATCH, PER_RECORD):
            raise ValueError(f"unknown reliability mode {self.reliability_mode!r}")

    def format_prefixes(self) -> list[str]:
        return [f.prefix for f in self.formats]

    def watermark(self, prefix: str) -> Datestamp | None:
        raw = self.last_harvest.get(prefix)
        return Datestamp.parse(raw) if raw else None

    def advance_watermark(self, prefix: str, stamp: Datestamp) -> None:
        current = self.watermark(prefix)
        if current is None or stamp.cmp(current) > 0:
            self.last_harvest[prefix] = stamp.serialize()

    def to_dict(self) -> dict:
        return {
            "repositoryId": self.repository_id,
            "baseURL": self.base_url,
            "trustRank": self.trust_rank,
            "pollIntervalSeconds": self.poll_interval,
            "reliabilityMode": self.reliability_mode,
            "status": self.status,
            "statusDetail": self.status_detail,
            "identify": _identify_to_dict(self.identify),
            "formats": [
                {"prefix": f.prefix, "schema": f.schema_url, "namespace": f.namespace}
                for f in self.formats
            ],
            "lastHarvest": dict(self.last_harvest),
            "failures": self.failures,
            "nextDue": self.next_due,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SourceRepository":
        return cls(
            repository_id=raw["repositoryId"],
            base_url=raw["baseURL"],
            trust_rank=raw["trustRank"],
            poll_interval=raw["pollIntervalSeconds"],
            reliability_mode=raw["reliabilityMode"],
            status=raw["status"],
            status_detail=raw.get("statusDetail", ""),
            identify=_identify_from_dict(raw.get("identify")),
            formats=[
                MetadataFormat(f["prefix"], f["schema"], f["namespace"])
                for f in raw.get("formats", [])
            ],
            last_harvest=dict(raw.get("lastHarvest", {})),
            failures=raw.get("failures", 0),
            next_due=raw.get("nextDue"),
        )


def _identify_to_dict(info: IdentifyInfo | None) -> dict | None:
    if info is None:
        return None
    return {
        "repositoryName": info.repository_name,
        "baseURL": info.base_url,
        "protocolVersion": info.protocol_version,
        "adminEmails": list(info.admin_emails),
        "earliestDatestamp": info.earliest_datestamp.serialize(),
        "deletedRecord": info.deleted_record,
        "granularity": info.granularity,
        "compressions": list(info.compressions),
        "descriptions": [d.decode("utf-8", "replace") for d in info.descriptions],
    }


def _identify_from_dict(raw: dict | None) -> IdentifyInfo | None:
    if raw is None:
        return None
    return IdentifyInfo(
        repository_name=raw["repositoryName"],
        base_url=raw["baseURL"],
        protocol_version=raw["protocolVersion"],
        admin_emails=tuple(raw["adminEmails"]),
        earliest_datestamp=Datestamp.parse(raw["earliestDatestamp"]),
        deleted_record=raw["deletedRecord"],
        granularity=raw["granularity"],
        compressions=tuple(raw.get("compressions", ())),
        descriptions=tuple(d.encode() for d in raw.get("descriptions", ())),
    )


class RegistrationError(Exception):
    """The repository cannot be registered (protocol mismatch, bad config)."""


class SourceRegistry:
    """All configured source repositories, persisted in the store's state."""

    def __init__(self, store, clock: Clock, session: requests.Session | None = None,
                 timeout: float = 30.0):
        self.store = store
        self.clock = clock
        self.session = session or requests.Session()
        self.timeout = timeout
        self._lock = threading.RLock()
        self._repos: dict[str, SourceRepository] = {
            rid: SourceRepository.from_dict(raw)
            for rid, raw in store.get_state("sources").items()
        }

    # -- access --------------------------------------------------------------

    def get(self, repository_id: str) -> SourceRepository | None:
        with self._lock:
            return self._repos.get(repository_id)

    def all(self) -> list[SourceRepository]:
        with self._lock:
            return sorted(self._repos.values(), key=lambda r: r.repository_id)

    def active(self) -> list[SourceRepository]:
        return [r for r in self.all() if r.status == ACTIVE]

    def trust_ranks(self) -> dict[str, int]:
        with self._lock:
            return {rid: repo.trust_rank for rid, repo in self._repos.items()}

    def persist(self) -> None:
        with self._lock:
            self.store.set_state(
                "sources", {rid: repo.to_dict() for rid, repo in self._repos.items()}
            )

    # -- registration --------------------------------------------------------

    def add(
        self,
        repository_id: str,
        base_url: str,
        trust_rank: int,
        poll_interval: int = 3600,
        reliability_mode: str = BATCH,
    ) -> SourceRepository:
        """Create the entry and attempt the upstream handshake immediately."""
        with self._lock:
            if repository_id in self._repos:
                raise RegistrationError(f"repository id {repository_id!r} already registered")
            clash = [
                r.repository_id
                for r in self._repos.values()
                if r.trust_rank == trust_rank
            ]
            if clash:
                raise RegistrationError(
                    f"trust rank {trust_rank} already used by {clash[0]!r}"
                )
            repo = SourceRepository(
                repository_id=repository_id,
                base_url=base_url,
                trust_rank=trust_rank,
                poll_interval=poll_interval,
                reliability_mode=reliability_mode,
            )
            self._repos[repository_id] = repo
        self.handshake(repo)
        self.persist()
        return repo

    def handshake(self, repo: SourceRepository) -> None:
        """Identify + ListMetadataFormats; sets the repository status."""
        try:
            identify = self._fetch_identify(repo)
            formats = self._fetch_formats(repo)
        except RegistrationError as exc:
            repo.status = REJECTED
            repo.status_detail = str(exc)
            log.warning("registration of %s rejected: %s", repo.repository_id, exc)
            return
        except requests.exceptions.RequestException as exc:
            repo.status = PENDING
            repo.status_detail = f"unreachable: {exc}"
            log.info("registration of %s pending: %s", repo.repository_id, exc)
            return
        repo.identify = identify
        repo.formats = formats
        repo.status = ACTIVE
        repo.status_detail = ""
        repo.next_due = None

    def _fetch_identify(self, repo: SourceRepository) -> IdentifyInfo:
        response = self.session.get(
            repo.base_url, params={"verb": "Identify"}, timeout=self.timeout
        )
        response.raise_for_status()
        result = parse_response(response.content)
        if result.fatal or result.response is None:
            reasons = "; ".join(v.message for v in result.violations if v.fatal)
            raise RegistrationError(f"Identify not usable: {reasons or 'unparseable'}")
        payload = result.response.payload
        if not isinstance(payload, IdentifyPayload):
            raise RegistrationError("Identify answered with an error response")
        return payload.info

    def _fetch_formats(self, repo: SourceRepository) -> list[MetadataFormat]:
        response = self.session.get(
            repo.base_url, params={"verb": "ListMetadataFormats"}, timeout=self.timeout
        )
        response.raise_for_status()
        result = parse_response(response.content)
        if result.fatal or result.response is None:
            raise RegistrationError("ListMetadataFormats not parseable")
        payload = result.response.payload
        if not isinstance(payload, FormatsPayload):
            raise RegistrationError("ListMetadataFormats answered with an error response")
        return list(payload.formats)
