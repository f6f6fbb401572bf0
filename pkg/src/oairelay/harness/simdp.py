"""In-process simulated OAI-PMH 2.0 data provider.

Serves all six verbs over real HTTP from a deterministic corpus, applies
configured faults at serialization time, honours simulated downtime
windows with 503s, and counts every request it answers. Time comes from an
injected clock, so responses are reproducible under test.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

from oairelay.clock import Clock, SimClock
from oairelay.harness.corpus import FORMATS, Corpus, build_corpus, fragment_for
from oairelay.harness.faults import FaultEngine, FaultSpec
from oairelay.httpd import AppServer, HttpRequest, HttpResponse
from oairelay.protocol.datestamp import Datestamp, in_range
from oairelay.protocol.model import (
    ErrorsPayload,
    FormatsPayload,
    HeadersPayload,
    IdentifyInfo,
    IdentifyPayload,
    OaiError,
    OaiErrorCode,
    OaiRecord,
    OaiRequest,
    OaiResponse,
    RecordHeader,
    RecordPayload,
    RecordsPayload,
    ResumptionToken,
    Verb,
)
from oairelay.protocol.request import parse_request
from oairelay.protocol.serialize import CONTENT_TYPE, serialize_response
from oairelay.protocol.tokens import TokenError, decode_token, encode_token


@dataclass
class SimDpConfig:
    repository_id: str
    record_count: int = 100
    formats: tuple[str, ...] = ("oai_dc",)
    page_size: int = 25
    protocol_version: str = "2.0"
    faults: tuple[FaultSpec, ...] = ()
    #: simulated (start, end) instants during which the provider answers 503
    downtime: tuple[tuple[str, str], ...] = ()
    seed: int = 0

    def __post_init__(self):
        unknown = [f for f in self.formats if f not in FORMATS]
        if unknown:
            raise ValueError(f"unknown metadata formats: {unknown}")
        if self.page_size < 1:
            raise ValueError("page size must be positive")


@dataclass
class RequestStats:
    total: int = 0
    by_verb: dict[str, int] = field(default_factory=dict)
    errors: int = 0


class SimulatedProvider:
    def __init__(self, config: SimDpConfig, clock: Clock | None = None):
        self.config = config
        self.clock = clock or SimClock()
        self.corpus: Corpus = build_corpus(
            config.repository_id, config.record_count, config.seed
        )
        self.faults = FaultEngine(
            config.faults, config.repository_id, config.record_count
        )
        self.stats = RequestStats()
        self._ordinal = 0
        self._down = False
        self._lock = threading.Lock()
        self.app = AppServer(f"simdp-{config.repository_id}")
        self.app.add_route("GET", "/oai", self._handle)

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> "SimulatedProvider":
        self.app.start()
        return self

    def close(self) -> None:
        self.app.close()

    def __enter__(self) -> "SimulatedProvider":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def oai_url(self) -> str:
        return f"{self.app.base_url}/oai"

    @property
    def request_count(self) -> int:
        return self.stats.total

    def set_down(self, down: bool) -> None:
        """Manual outage switch used by scenario kill/restart steps."""
        self._down = down

    # -- fault bookkeeping ---------------------------------------------------

    def damaged_identifiers(self) -> dict[str, list[str]]:
        """identifier -> fault kinds, for oracle comparison."""
        return {
            self.corpus.by_index(i).identifier: kinds
            for i, kinds in self.faults.affected_map().items()
        }

    def unrepairable_identifiers(self) -> set[str]:
        return {
            self.corpus.by_index(i).identifier
            for i in self.faults.unrepairable_indices()
        }

    # -- request handling ----------------------------------------------------

    def _handle(self, request: HttpRequest) -> HttpResponse:
        now = self.clock.now()
        retry_in = self._downtime_remaining(now)
        if retry_in is not None:
            return HttpResponse.text(
                503, "simulated downtime\n", **{"Retry-After": str(retry_in)}
            )

        with self._lock:
            self.stats.total += 1
            self._ordinal += 1
            ordinal = self._ordinal

        parsed = parse_request(request.single_query())
        if isinstance(parsed, OaiError):
            self.stats.errors += 1
            return self._emit(
                verb=None,
                payload=ErrorsPayload((parsed,)),
                echo=self._safe_echo(request),
                page_indices=[],
                ordinal=ordinal,
            )

        self.stats.by_verb[parsed.verb.value] = self.stats.by_verb.get(parsed.verb.value, 0) + 1
        handler = {
            Verb.IDENTIFY: self._identify,
            Verb.LIST_METADATA_FORMATS: self._list_formats,
            Verb.LIST_SETS: self._list_sets,
            Verb.LIST_IDENTIFIERS: self._list_headers,
            Verb.LIST_RECORDS: self._list_records,
            Verb.GET_RECORD: self._get_record,
        }[parsed.verb]
        payload, page_indices = handler(parsed)
        if isinstance(payload, ErrorsPayload):
            self.stats.errors += 1
        return self._emit(
            verb=parsed.verb,
            payload=payload,
            echo=parsed.echo_arguments(),
            page_indices=page_indices,
            ordinal=ordinal,
        )

    def _safe_echo(self, request: HttpRequest) -> dict[str, str]:
        # On badVerb/badArgument the request element echoes no attributes.
        return {}

    def _downtime_remaining(self, now) -> int | None:
        if self._down:
            return 60
        stamp = Datestamp(now)
        for start, end in self.config.downtime:
            low, high = Datestamp.parse(start), Datestamp.parse(end)
            if low.cmp(stamp) <= 0 and stamp.cmp(high) < 0:
                return max(1, math.ceil((high.instant - now).total_seconds()))
        return None

    def _emit(self, verb, payload, echo, page_indices, ordinal) -> HttpResponse:
        response = OaiResponse(
            response_date=Datestamp(self.clock.now()),
            base_url=self.oai_url,
            verb=verb,
            payload=payload,
            echo=echo,
        )
        body = serialize_response(response)
        body = self.faults.damage_response(body, page_indices, ordinal)
        return HttpResponse(200, body, CONTENT_TYPE)

    # -- verbs ---------------------------------------------------------------

    def _identify(self, req: OaiRequest):
        ordered = self.corpus.ordered()
        earliest = min(
            (r.datestamp for r in ordered),
            key=lambda d: d.instant,
            default=Datestamp.parse("2002-01-01T00:00:00Z"),
        )
        info = IdentifyInfo(
            repository_name=f"Simulated repository {self.config.repository_id}",
            base_url=self.oai_url,
            protocol_version=self.config.protocol_version,
            admin_emails=(f"admin@{self.config.repository_id}.example.org",),
            earliest_datestamp=earliest,
            deleted_record="persistent",
            granularity="YYYY-MM-DDThh:mm:ssZ",
        )
        return IdentifyPayload(info), []

    def _list_formats(self, req: OaiRequest):
        if req.identifier is not None and req.identifier not in self.corpus.records:
            return self._error(OaiErrorCode.ID_DOES_NOT_EXIST, req.identifier)
        formats = tuple(FORMATS[name] for name in self.config.formats)
        return FormatsPayload(formats), []

    def _list_sets(self, req: OaiRequest):
        return self._error(
            OaiErrorCode.NO_SET_HIERARCHY, "this repository does not organize sets"
        )

    def _select(self, req: OaiRequest):
        """(matching records, cursor, error) applying token or from/until args."""
        if req.resumption_token is not None:
            try:
                payload = decode_token(req.resumption_token)
                req = OaiRequest(
                    verb=req.verb,
                    metadata_prefix=payload["prefix"],
                    from_=Datestamp.parse(payload["from"]) if payload.get("from") else None,
                    until=Datestamp.parse(payload["until"]) if payload.get("until") else None,
                    resumption_token=req.resumption_token,
                )
                cursor = int(payload["cursor"])
                if payload.get("verb") != req.verb.value:
                    raise TokenError("token issued for a different verb")
            except (TokenError, KeyError, ValueError) as exc:
                return None, None, self._error(
                    OaiErrorCode.BAD_RESUMPTION_TOKEN, str(exc)
                )
        else:
            cursor = 0

        if req.metadata_prefix not in self.config.formats:
            return None, None, self._error(
                OaiErrorCode.CANNOT_DISSEMINATE_FORMAT, req.metadata_prefix or ""
            )
        matched = [
            r
            for r in self.corpus.ordered()
            if in_range(r.datestamp, req.from_, req.until)
        ]
        if not matched:
            return None, None, self._error(OaiErrorCode.NO_RECORDS_MATCH)
        if cursor >= len(matched) or cursor < 0:
            return None, None, self._error(
                OaiErrorCode.BAD_RESUMPTION_TOKEN, "cursor beyond list end"
            )
        return (matched, cursor, None), req, None

    def _page(self, matched, cursor, req: OaiRequest):
        page = matched[cursor : cursor + self.config.page_size]
        nxt = cursor + self.config.page_size
        if nxt < len(matched):
            token = ResumptionToken(
                token=encode_token(
                    {
                        "verb": req.verb.value,
                        "prefix": req.metadata_prefix,
                        "from": req.from_.serialize() if req.from_ else None,
                        "until": req.until.serialize() if req.until else None,
                        "cursor": nxt,
                    }
                ),
                complete_list_size=len(matched),
                cursor=cursor,
            )
        elif cursor > 0:
            token = ResumptionToken("", complete_list_size=len(matched), cursor=cursor)
        else:
            token = None
        return page, token

    def _list_headers(self, req: OaiRequest):
        selected, req2, error = self._select(req)
        if error is not None:
            return error
        matched, cursor, _ = selected
        page, token = self._page(matched, cursor, req2)
        headers = tuple(self._header(r) for r in page)
        return HeadersPayload(headers, token), []

    def _list_records(self, req: OaiRequest):
        selected, req2, error = self._select(req)
        if error is not None:
            return error
        matched, cursor, _ = selected
        page, token = self._page(matched, cursor, req2)
        records = tuple(self._record(r, req2.metadata_prefix) for r in page)
        return RecordsPayload(records, token), [r.index for r in page]

    def _get_record(self, req: OaiRequest):
        if req.metadata_prefix not in self.config.formats:
            return self._error(
                OaiErrorCode.CANNOT_DISSEMINATE_FORMAT, req.metadata_prefix or ""
            )
        record = self.corpus.records.get(req.identifier)
        if record is None:
            return self._error(OaiErrorCode.ID_DOES_NOT_EXIST, req.identifier or "")
        return RecordPayload(self._record(record, req.metadata_prefix)), [record.index]

    # -- record shaping ------------------------------------------------------

    def _header(self, record) -> RecordHeader:
        return RecordHeader(
            identifier=record.identifier,
            datestamp=record.datestamp,
            deleted=record.deleted,
        )

    def _record(self, record, metadata_prefix: str) -> OaiRecord:
        header = self._header(record)
        if record.deleted:
            return OaiRecord(header)
        return OaiRecord(header, fragment_for(record, metadata_prefix))

    def _error(self, code: OaiErrorCode, message: str = ""):
        return ErrorsPayload((OaiError(code, message),)), []


def spawn_sim_dp(config: SimDpConfig, clock: Clock | None = None) -> SimulatedProvider:
    return SimulatedProvider(config, clock).start()
