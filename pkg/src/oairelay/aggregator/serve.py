"""Serving stored records back out over the harvesting protocol.

Two kinds of view share one implementation. The aggregated view merges every
source; when several sources hold the same (identifier, format) key, the
most-trusted source's copy is served. A wrapped view exposes exactly one
source repository's records, and replays that repository's own Identify
snapshot with the base URL swapped for the wrapped endpoint.

Served datestamps are always the local ones assigned at ingestion, so
downstream harvesters can rely on our clock for incremental windows no
matter what the sources' clocks did. List responses page with stateless
resumption tokens that encode the whole query; a token outlives neither its
expiry nor the store generation it was minted against.
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Mapping
from datetime import timedelta

from oairelay.aggregator.collisions import trust_winner
from oairelay.aggregator.sources import ACTIVE, SourceRegistry
from oairelay.aggregator.store import RecordStore, StoredRecord
from oairelay.clock import Clock
from oairelay.protocol.datestamp import Datestamp, in_range
from oairelay.protocol.model import (
    ErrorsPayload,
    FormatsPayload,
    HeadersPayload,
    IdentifyInfo,
    IdentifyPayload,
    MetadataFormat,
    OaiError,
    OaiErrorCode,
    OaiRecord,
    OaiRequest,
    OaiResponse,
    Payload,
    RecordHeader,
    RecordPayload,
    RecordsPayload,
    ResumptionToken,
    Verb,
)
from oairelay.protocol.request import parse_request
from oairelay.protocol.serialize import serialize_response
from oairelay.protocol.tokens import TokenError, decode_token, encode_token

log = logging.getLogger(__name__)

AGGREGATED = ""  # the view id of the merged endpoint

DEFAULT_PAGE_SIZE = 100
TOKEN_TTL_SECONDS = 24 * 3600


class UnknownView(KeyError):
    pass


class ViewServer:
    def __init__(
        self,
        store: RecordStore,
        registry: SourceRegistry,
        clock: Clock,
        *,
        base_url: str,
        repository_name: str = "Aggregating relay",
        admin_email: str = "admin@relay.invalid",
        page_size: int = DEFAULT_PAGE_SIZE,
        token_ttl: int = TOKEN_TTL_SECONDS,
    ):
        self.store = store
        self.registry = registry
        self.clock = clock
        self.base_url = base_url.rstrip("/")
        self.repository_name = repository_name
        self.admin_email = admin_email
        self.page_size = page_size
        self.token_ttl = token_ttl

    # -- entry point ---------------------------------------------------------

    def handle(self, view: str, params: Mapping[str, object]) -> bytes:
        """Answer one protocol request against a view; returns the body."""
        if view != AGGREGATED and self.registry.get(view) is None:
            raise UnknownView(view)
        now = Datestamp(self.clock.now())
        parsed = parse_request(params)
        if isinstance(parsed, OaiError):
            payload: Payload = ErrorsPayload((parsed,))
            response = OaiResponse(now, self._view_url(view), None, payload)
            return serialize_response(response)
        payload = self._dispatch(view, parsed, now)
        response = OaiResponse(
            now, self._view_url(view), parsed.verb, payload, parsed.echo_arguments()
        )
        return serialize_response(response)

    def _view_url(self, view: str) -> str:
        if view == AGGREGATED:
            return self.base_url
        return f"{self.base_url}/{view}"

    def _dispatch(self, view: str, request: OaiRequest, now: Datestamp) -> Payload:
        if request.verb is Verb.IDENTIFY:
            return self._identify(view, now)
        if request.verb is Verb.LIST_METADATA_FORMATS:
            return self._list_formats(view, request.identifier)
        if request.verb is Verb.LIST_SETS:
            return _errors(OaiErrorCode.NO_SET_HIERARCHY, "this repository has no sets")
        if request.verb is Verb.GET_RECORD:
            return self._get_record(view, request)
        return self._list(view, request, now)

    # -- record selection ----------------------------------------------------

    def _served_entries(self, view: str) -> list[StoredRecord]:
        """Every record the view serves, in identifier order."""
        ranks = self.registry.trust_ranks()
        out: list[StoredRecord] = []
        for key in self.store.keys():
            entries = self.store.get(key)
            if view == AGGREGATED:
                out.append(trust_winner(entries, ranks))
            elif view in entries:
                out.append(entries[view])
        return out

    def _served_entry(self, view: str, identifier: str, prefix: str) -> StoredRecord | None:
        entries = self.store.get((identifier, prefix))
        if not entries:
            return None
        if view == AGGREGATED:
            return trust_winner(entries, self.registry.trust_ranks())
        return entries.get(view)

    def _known_prefixes(self, view: str) -> set[str]:
        prefixes = {f.prefix for f in self._format_table(view).values()}
        for identifier, prefix in self.store.keys():
            if view == AGGREGATED or view in self.store.get((identifier, prefix)):
                prefixes.add(prefix)
        return prefixes

    def _format_table(self, view: str) -> dict[str, MetadataFormat]:
        """prefix -> format, from source handshakes."""
        table: dict[str, MetadataFormat] = {}
        if view == AGGREGATED:
            repos = sorted(self.registry.all(), key=lambda r: r.repository_id)
            for repo in repos:
                if repo.status != ACTIVE:
                    continue
                for fmt in repo.formats:
                    table.setdefault(fmt.prefix, fmt)
        else:
            repo = self.registry.get(view)
            if repo is not None:
                for fmt in repo.formats:
                    table.setdefault(fmt.prefix, fmt)
        return table

    # -- verbs ---------------------------------------------------------------

    def _identify(self, view: str, now: Datestamp) -> Payload:
        if view != AGGREGATED:
            repo = self.registry.get(view)
            if repo is not None and repo.identify is not None:
                replayed = dataclasses.replace(
                    repo.identify, base_url=self._view_url(view)
                )
                return IdentifyPayload(replayed)
        entries = self._served_entries(view)
        if entries:
            earliest = min(
                (e.local_datestamp for e in entries), key=lambda d: d.serialize()
            )
        else:
            earliest = now
        name = self.repository_name if view == AGGREGATED else f"{self.repository_name} [{view}]"
        info = IdentifyInfo(
            repository_name=name,
            base_url=self._view_url(view),
            protocol_version="2.0",
            admin_emails=(self.admin_email,),
            earliest_datestamp=earliest,
            deleted_record="persistent",
            granularity="YYYY-MM-DDThh:mm:ssZ",
        )
        return IdentifyPayload(info)

    def _list_formats(self, view: str, identifier: str | None) -> Payload:
        table = self._format_table(view)
        if identifier is None:
            if not table:
                return _errors(
                    OaiErrorCode.NO_METADATA_FORMATS, "no formats registered"
                )
            return FormatsPayload(tuple(table.values()))
        held = [
            prefix
            for (ident, prefix) in self.store.keys()
            if ident == identifier
            and (view == AGGREGATED or view in self.store.get((ident, prefix)))
        ]
        if not held:
            return _errors(OaiErrorCode.ID_DOES_NOT_EXIST, identifier)
        formats = tuple(table[p] for p in held if p in table)
        if not formats:
            return _errors(
                OaiErrorCode.NO_METADATA_FORMATS,
                "no registered format for this item",
            )
        return FormatsPayload(formats)

    def _get_record(self, view: str, request: OaiRequest) -> Payload:
        if request.metadata_prefix not in self._known_prefixes(view):
            return _errors(OaiErrorCode.CANNOT_DISSEMINATE_FORMAT, request.metadata_prefix)
        entry = self._served_entry(view, request.identifier, request.metadata_prefix)
        if entry is None:
            return _errors(OaiErrorCode.ID_DOES_NOT_EXIST, request.identifier)
        return RecordPayload(_wire_record(entry))

    def _list(self, view: str, request: OaiRequest, now: Datestamp) -> Payload:
        verb = request.verb
        if request.resumption_token is not None:
            state = self._decode_list_token(view, verb, request.resumption_token, now)
            if isinstance(state, OaiError):
                return ErrorsPayload((state,))
            prefix, from_, until, cursor = state
        else:
            prefix = request.metadata_prefix
            from_, until = request.from_, request.until
            cursor = 0
            if prefix not in self._known_prefixes(view):
                return _errors(OaiErrorCode.CANNOT_DISSEMINATE_FORMAT, prefix)

        selected = [
            e
            for e in self._served_entries(view)
            if e.metadata_prefix == prefix
            and in_range(e.local_datestamp, from_, until)
        ]
        if not selected:
            return _errors(OaiErrorCode.NO_RECORDS_MATCH, "no records in range")
        if cursor >= len(selected) or cursor % self.page_size:
            return _errors(OaiErrorCode.BAD_RESUMPTION_TOKEN, "stale cursor")

        page = selected[cursor : cursor + self.page_size]
        token = self._page_token(
            view, verb, prefix, from_, until, cursor, len(selected), now
        )
        if verb is Verb.LIST_IDENTIFIERS:
            return HeadersPayload(tuple(_wire_header(e) for e in page), token)
        return RecordsPayload(tuple(_wire_record(e) for e in page), token)

    # -- pagination ----------------------------------------------------------

    def _page_token(
        self,
        view: str,
        verb: Verb,
        prefix: str,
        from_: Datestamp | None,
        until: Datestamp | None,
        cursor: int,
        total: int,
        now: Datestamp,
    ) -> ResumptionToken | None:
        next_cursor = cursor + self.page_size
        if next_cursor >= total:
            if cursor == 0:
                return None  # single page: no token element at all
            return ResumptionToken("", complete_list_size=total, cursor=cursor)
        expires = Datestamp(now.instant + timedelta(seconds=self.token_ttl))
        payload = {
            "v": view,
            "verb": verb.value,
            "prefix": prefix,
            "from": from_.serialize() if from_ else "",
            "until": until.serialize() if until else "",
            "cursor": next_cursor,
            "gen": self.store.generation,
            "exp": expires.serialize(),
        }
        return ResumptionToken(
            encode_token(payload),
            complete_list_size=total,
            cursor=cursor,
            expiration_date=expires,
        )

    def _decode_list_token(
        self, view: str, verb: Verb, token: str, now: Datestamp
    ) -> tuple | OaiError:
        try:
            payload = decode_token(token)
            if payload["v"] != view or payload["verb"] != verb.value:
                raise ValueError("token belongs to a different request")
            if payload["gen"] != self.store.generation:
                raise ValueError("store changed since the token was issued")
            expires = Datestamp.parse(payload["exp"])
            if now.cmp(expires) > 0:
                raise ValueError("token expired")
            cursor = int(payload["cursor"])
            if cursor <= 0:
                raise ValueError("bad cursor")
            from_ = Datestamp.parse(payload["from"]) if payload["from"] else None
            until = Datestamp.parse(payload["until"]) if payload["until"] else None
            prefix = payload["prefix"]
        except (TokenError, KeyError, ValueError) as exc:
            log.debug("rejecting resumption token: %s", exc)
            return OaiError(OaiErrorCode.BAD_RESUMPTION_TOKEN, "token not usable")
        return prefix, from_, until, cursor


def _errors(code: OaiErrorCode, message: str) -> ErrorsPayload:
    return ErrorsPayload((OaiError(code, message),))


def _wire_header(entry: StoredRecord) -> RecordHeader:
    return RecordHeader(
        identifier=entry.identifier,
        datestamp=entry.local_datestamp,
        deleted=entry.deleted,
    )


def _wire_record(entry: StoredRecord) -> OaiRecord:
    header = _wire_header(entry)
    if entry.deleted:
        return OaiRecord(header=header)
    return OaiRecord(header=header, metadata=entry.metadata, abouts=entry.abouts)
