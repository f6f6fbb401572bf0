"""Harvesting source repositories into the store.

A harvest pass asks for everything since the stored watermark, follows
resumption tokens to the end, and ingests record by record. Ingestion
rewrites the datestamp — the stored record's local datestamp is the harvest
instant, never the source's — and appends a provenance hop that nests any
provenance the record already carried. The watermark only advances when the
whole pass succeeded, so an interrupted pass re-fetches; re-ingesting the
same record is a harmless overwrite.

Upstream bodies go through the same repair pipeline the proxy uses, so a
direct source connection behaves like a proxied one: repairable damage is
fixed (and flags the record as altered), unrepairable records are dropped,
and a broken envelope fails the pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import requests

from oairelay.aggregator.collisions import (
    KEEP_BOTH,
    KEEP_EXISTING,
    REPLACE,
    CollisionPolicy,
    resolve_collision,
    trust_winner,
)
from oairelay.aggregator.sources import PER_RECORD, SourceRegistry, SourceRepository
from oairelay.aggregator.store import RecordStore, StoredRecord
from oairelay.clock import Clock
from oairelay.protocol.datestamp import Datestamp
from oairelay.protocol.identifiers import validate_identifier
from oairelay.protocol.model import (
    ErrorsPayload,
    HeadersPayload,
    OaiErrorCode,
    OaiRecord,
    ProvenanceEntry,
    RecordPayload,
    RecordsPayload,
    ResumptionToken,
)
from oairelay.protocol.parse import PROTOCOL, SCHEMA, parse_response
from oairelay.protocol.provenance import find_provenance, provenance_fragment
from oairelay.repair.pipeline import RepairOutcome, repair_response

log = logging.getLogger(__name__)


@dataclass
class HarvestResult:
    repository_id: str
    metadata_prefix: str
    ok: bool = True
    ingested: int = 0
    discarded: int = 0
    rejected: int = 0
    dropped: int = 0
    pages: int = 0
    reason: str = ""
    altered_identifiers: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "repositoryId": self.repository_id,
            "metadataPrefix": self.metadata_prefix,
            "ok": self.ok,
            "ingested": self.ingested,
            "discarded": self.discarded,
            "rejected": self.rejected,
            "dropped": self.dropped,
            "pages": self.pages,
            "reason": self.reason,
        }


class HarvestError(Exception):
    pass


@dataclass
class _Fetched:
    """One repaired upstream response, reduced to what ingestion needs."""

    payload: object
    response_date: Datestamp | None
    token: ResumptionToken | None
    records: tuple[OaiRecord, ...]
    alterations: list[bool]
    dropped: int


def _all_records_doomed(outcome: RepairOutcome) -> bool:
    """True when the envelope was sound but every record had to go."""
    parse = outcome.parse
    if parse is None or parse.fatal or parse.response is None:
        return False
    if not parse.record_spans:
        return False
    if len(parse.record_violations()) != len(parse.record_spans):
        return False
    return not any(
        v.klass in (SCHEMA, PROTOCOL) and v.record_index is None
        for v in parse.violations
    )


class Harvester:
    def __init__(
        self,
        store: RecordStore,
        registry: SourceRegistry,
        policy: CollisionPolicy,
        clock: Clock,
        session: requests.Session | None = None,
        timeout: float = 30.0,
    ):
        self.store = store
        self.registry = registry
        self.policy = policy
        self.clock = clock
        self.session = session or requests.Session()
        self.timeout = timeout

    # -- one pass ------------------------------------------------------------

    def harvest_once(self, repo: SourceRepository, metadata_prefix: str) -> HarvestResult:
        result = HarvestResult(repo.repository_id, metadata_prefix)
        now = Datestamp(self.clock.now())
        watermark = repo.watermark(metadata_prefix)
        try:
            if repo.reliability_mode == PER_RECORD:
                new_watermark = self._harvest_per_record(
                    repo, metadata_prefix, watermark, now, result
                )
            else:
                new_watermark = self._harvest_batch(
                    repo, metadata_prefix, watermark, now, result
                )
        except HarvestError as exc:
            result.ok = False
            result.reason = str(exc)
            log.warning(
                "harvest of %s (%s) failed: %s", repo.repository_id, metadata_prefix, exc
            )
            return result
        if new_watermark is not None:
            repo.advance_watermark(metadata_prefix, new_watermark)
        self.registry.persist()
        if result.ingested or result.dropped:
            self.store.bump_generation()
        return result

    def _start_params(self, verb: str, metadata_prefix: str, watermark) -> dict:
        params = {"verb": verb, "metadataPrefix": metadata_prefix}
        if watermark is not None:
            params["from"] = watermark.serialize()
        return params

    def _harvest_batch(self, repo, metadata_prefix, watermark, now, result):
        params = self._start_params("ListRecords", metadata_prefix, watermark)
        first_response_date: Datestamp | None = None
        while True:
            fetched = self._fetch(repo, params, metadata_prefix)
            result.pages += 1
            if first_response_date is None:
                first_response_date = fetched.response_date
            if isinstance(fetched.payload, ErrorsPayload):
                if self._is_empty_list(fetched.payload) and result.pages == 1:
                    return first_response_date
                raise HarvestError(self._describe_errors(fetched.payload))
            if not isinstance(fetched.payload, RecordsPayload):
                raise HarvestError("upstream answered a different verb")
            result.dropped += fetched.dropped
            for position, record in enumerate(fetched.records):
                altered = (
                    fetched.alterations[position]
                    if position < len(fetched.alterations)
                    else False
                )
                self._ingest_one(
                    record, repo, metadata_prefix, now, altered=altered, result=result
                )
            if fetched.token is None or fetched.token.final:
                return first_response_date
            params = {"verb": "ListRecords", "resumptionToken": fetched.token.token}

    def _harvest_per_record(self, repo, metadata_prefix, watermark, now, result):
        params = self._start_params("ListIdentifiers", metadata_prefix, watermark)
        first_response_date: Datestamp | None = None
        live: list[str] = []
        deleted_headers = []
        while True:
            fetched = self._fetch(repo, params, metadata_prefix)
            result.pages += 1
            if first_response_date is None:
                first_response_date = fetched.response_date
            if isinstance(fetched.payload, ErrorsPayload):
                if self._is_empty_list(fetched.payload) and result.pages == 1:
                    return first_response_date
                raise HarvestError(self._describe_errors(fetched.payload))
            if not isinstance(fetched.payload, HeadersPayload):
                raise HarvestError("upstream answered a different verb")
            for header in fetched.payload.headers:
                if header.deleted:
                    deleted_headers.append(header)
                else:
                    live.append(header.identifier)
            if fetched.token is None or fetched.token.final:
                break
            params = {"verb": "ListIdentifiers", "resumptionToken": fetched.token.token}

        for header in deleted_headers:
            self._ingest_one(
                OaiRecord(header=header),
                repo,
                metadata_prefix,
                now,
                altered=False,
                result=result,
            )
        for identifier in live:
            fetched = self._fetch(
                repo,
                {
                    "verb": "GetRecord",
                    "identifier": identifier,
                    "metadataPrefix": metadata_prefix,
                },
                metadata_prefix,
            )
            if fetched.payload is None and fetched.dropped:
                # the one record in the response was unrepairable
                result.dropped += fetched.dropped
                continue
            if isinstance(fetched.payload, ErrorsPayload):
                raise HarvestError(
                    f"GetRecord {identifier} failed: "
                    + self._describe_errors(fetched.payload)
                )
            if not isinstance(fetched.payload, RecordPayload):
                raise HarvestError("upstream answered a different verb")
            altered = bool(fetched.alterations and fetched.alterations[0])
            self._ingest_one(
                fetched.payload.record,
                repo,
                metadata_prefix,
                now,
                altered=altered,
                result=result,
            )
        return first_response_date

    @staticmethod
    def _is_empty_list(payload: ErrorsPayload) -> bool:
        return {e.code for e in payload.errors} == {OaiErrorCode.NO_RECORDS_MATCH}

    @staticmethod
    def _describe_errors(payload: ErrorsPayload) -> str:
        return "upstream error: " + ", ".join(
            sorted(e.code.value for e in payload.errors)
        )

    def _fetch(self, repo, params, metadata_prefix) -> _Fetched:
        try:
            http = self.session.get(repo.base_url, params=params, timeout=self.timeout)
        except requests.exceptions.RequestException as exc:
            raise HarvestError(f"unreachable: {exc}") from exc
        if http.status_code != 200:
            raise HarvestError(f"HTTP {http.status_code} from upstream")
        outcome = repair_response(http.content, metadata_prefix=metadata_prefix)
        if not outcome.ok:
            if _all_records_doomed(outcome):
                # Envelope is fine; every record in it was dropped. Keep the
                # pass going — there may be a token, and in the single-record
                # case the caller counts the drop.
                parse = outcome.parse
                payload = parse.response.payload
                token = getattr(payload, "token", None)
                return _Fetched(
                    payload=None,
                    response_date=parse.response.response_date,
                    token=token,
                    records=(),
                    alterations=[],
                    dropped=len(parse.record_spans),
                )
            reasons = "; ".join(
                f"{v.klass}: {v.message}" for v in outcome.report.residual_violations
            )
            raise HarvestError(f"unrepairable response: {reasons}")
        result = parse_response(outcome.body)
        if result.response is None or result.fatal:
            raise HarvestError("repaired response did not re-parse")
        for identifier in outcome.report.dropped_records:
            log.info(
                "dropping unrepairable record %s from %s",
                identifier,
                repo.repository_id,
            )
        payload = result.response.payload
        records = getattr(payload, "records", ())
        if isinstance(payload, RecordPayload):
            records = (payload.record,)
        return _Fetched(
            payload=payload,
            response_date=result.response.response_date,
            token=getattr(payload, "token", None),
            records=tuple(records),
            alterations=list(outcome.record_alterations.values()),
            dropped=len(outcome.report.dropped_records),
        )

    # -- single record -------------------------------------------------------

    def _ingest_one(
        self,
        record: OaiRecord,
        repo: SourceRepository,
        metadata_prefix: str,
        now: Datestamp,
        altered: bool,
        result: HarvestResult,
    ) -> None:
        check = validate_identifier(record.header.identifier)
        if not check.valid:
            result.rejected += 1
            log.warning(
                "rejecting record with invalid identifier %r from %s: %s",
                record.header.identifier,
                repo.repository_id,
                check.reason,
            )
            return
        stored = self.ingest_record(
            record, repo, metadata_prefix, now=now, altered=altered
        )
        if stored is None:
            result.discarded += 1
        else:
            result.ingested += 1
            if altered:
                result.altered_identifiers.append(record.header.identifier)

    def ingest_record(
        self,
        record: OaiRecord,
        repo: SourceRepository,
        metadata_prefix: str,
        *,
        now: Datestamp,
        altered: bool = False,
    ) -> StoredRecord | None:
        """Store one harvested record; returns None when a policy discards it."""
        incoming = self._build_stored(record, repo, metadata_prefix, now, altered)
        key = incoming.key
        existing_entries = self.store.get(key)

        if not existing_entries or repo.repository_id in existing_entries:
            # first sighting, or a refresh from the same source: plain overwrite
            self.store.put(incoming)
            return incoming

        rival = trust_winner(existing_entries, self.registry.trust_ranks())
        decision = resolve_collision(
            rival, incoming, self.policy, self.registry.trust_ranks()
        )
        if decision == KEEP_EXISTING:
            return None
        if decision == REPLACE:
            for source_id in list(existing_entries):
                self.store.drop(key, source_id)
            self.store.put(incoming)
            return incoming
        if decision == KEEP_BOTH:
            self.store.put(incoming)
            return incoming
        raise AssertionError(f"unknown decision {decision!r}")

    def _build_stored(
        self,
        record: OaiRecord,
        repo: SourceRepository,
        metadata_prefix: str,
        now: Datestamp,
        altered: bool,
    ) -> StoredRecord:
        prov_index, parent = find_provenance(record.abouts)
        other_abouts = tuple(
            fragment for i, fragment in enumerate(record.abouts) if i != prov_index
        )
        namespace = next(
            (f.namespace for f in repo.formats if f.prefix == metadata_prefix), ""
        )
        hop = ProvenanceEntry(
            base_url=repo.base_url,
            origin_identifier=record.header.identifier,
            origin_datestamp=record.header.datestamp,
            metadata_namespace=namespace,
            harvest_date=now,
            altered=altered,
            parent=parent,
        )
        return StoredRecord(
            identifier=record.header.identifier,
            metadata_prefix=metadata_prefix,
            source_id=repo.repository_id,
            original_datestamp=record.header.datestamp,
            local_datestamp=now,
            metadata=record.metadata,
            abouts=other_abouts + (provenance_fragment(hop),),
            deleted=record.header.deleted,
        )
