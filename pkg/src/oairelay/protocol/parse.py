"""Tolerant response parsing with a classified violation list.

The parser accepts damaged bodies: it sanitizes invalid UTF-8, bare markup
characters and unquoted attributes internally (recording a violation for
each), then parses strictly and walks the tree checking the protocol
structure. Fragment payloads (metadata, about, description) are sliced out
of the sanitized bytes so they stay byte-preserving, never re-serialized.

Violation classes:

- ``utf8``     invalid byte sequences (offsets into the body as received)
- ``entity``   bare ``&`` / ``<`` in character data
- ``markup``   quoting errors and anything a strict parser still rejects
- ``schema``   structural or lexical deviations inside the payload
- ``protocol`` envelope-level deviations (missing responseDate, 1.x input, ...)

Offsets for post-decoding classes refer to the sanitized byte stream; for
clean input the two coincide.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from oairelay.protocol.datestamp import Datestamp
from oairelay.protocol.identifiers import validate_identifier
from oairelay.protocol.model import (
    OAI_NS,
    ErrorsPayload,
    FormatsPayload,
    HeadersPayload,
    IdentifyInfo,
    IdentifyPayload,
    MetadataFormat,
    OaiError,
    OaiErrorCode,
    OaiRecord,
    OaiResponse,
    RecordHeader,
    RecordPayload,
    RecordsPayload,
    ResumptionToken,
    SetInfo,
    SetsPayload,
    Verb,
)
from oairelay.repair.entities import repair_entities
from oairelay.repair.markup import repair_markup
from oairelay.repair.utf8 import repair_utf8
from oairelay.xmlscan import ElementSpan, ScanError, element_spans

UTF8 = "utf8"
ENTITY = "entity"
MARKUP = "markup"
SCHEMA = "schema"
PROTOCOL = "protocol"

_GRANULARITIES = {"YYYY-MM-DD", "YYYY-MM-DDThh:mm:ssZ"}
_DELETED_RECORD_VALUES = {"no", "transient", "persistent"}


@dataclass(frozen=True)
class Violation:
    klass: str
    offset: int
    message: str
    fatal: bool = False
    record_index: int | None = None


@dataclass
class ParseResult:
    response: OaiResponse | None
    violations: list[Violation] = field(default_factory=list)
    #: sanitized bytes the fragments were sliced from
    sanitized: bytes = b""
    #: byte spans of <record> elements within `sanitized`
    record_spans: list[ElementSpan] = field(default_factory=list)
    #: the byte-level replacements applied to produce `sanitized`
    utf8_fixes: list = field(default_factory=list)
    entity_fixes: list = field(default_factory=list)
    markup_fixes: list = field(default_factory=list)

    @property
    def fatal(self) -> bool:
        return any(v.fatal for v in self.violations)

    def record_violations(self) -> dict[int, list[Violation]]:
        by_index: dict[int, list[Violation]] = {}
        for v in self.violations:
            if v.record_index is not None:
                by_index.setdefault(v.record_index, []).append(v)
        return by_index


def _q(name: str) -> str:
    return f"{{{OAI_NS}}}{name}"


def parse_response(
    body: bytes, *, expected_metadata_namespace: str | None = None
) -> ParseResult:
    """Best-effort parse of a full response body into a typed response."""
    result = ParseResult(response=None)

    sanitized, utf8_fixes = repair_utf8(body)
    result.utf8_fixes = utf8_fixes
    for fix in utf8_fixes:
        result.violations.append(
            Violation(UTF8, fix.offset, f"invalid UTF-8 sequence {fix.original.hex()}")
        )

    if b"<" not in sanitized:
        result.violations.append(Violation(MARKUP, 0, "no root element", fatal=True))
        return result

    sanitized, entity_fixes = repair_entities(sanitized)
    result.entity_fixes = entity_fixes
    for fix in entity_fixes:
        what = "bare ampersand" if fix.original == b"&" else "bare '<'"
        result.violations.append(Violation(ENTITY, fix.offset, f"{what} in character data"))
    sanitized, markup_fixes = repair_markup(sanitized)
    result.markup_fixes = markup_fixes
    for fix in markup_fixes:
        result.violations.append(
            Violation(
                MARKUP, fix.offset, f"unquoted attribute value {fix.original.decode('utf-8', 'replace')!r}"
            )
        )
    result.sanitized = sanitized

    try:
        root = ET.fromstring(sanitized)
    except ET.ParseError as exc:
        offset = getattr(exc, "position", (0, 0))
        result.violations.append(
            Violation(MARKUP, _line_col_to_offset(sanitized, offset), str(exc), fatal=True)
        )
        return result

    try:
        result.record_spans = element_spans(sanitized, b"record")
    except ScanError as exc:
        result.violations.append(Violation(MARKUP, 0, str(exc), fatal=True))
        return result

    _Extractor(result, sanitized, expected_metadata_namespace).extract(root)
    return result


def _line_col_to_offset(data: bytes, position: tuple[int, int]) -> int:
    line, col = position
    offset = 0
    for _ in range(line):
        nl = data.find(b"\n", offset)
        if nl < 0:
            return offset
        offset = nl + 1
    return min(offset + col, len(data))


class _Extractor:
    def __init__(self, result: ParseResult, sanitized: bytes, expected_ns: str | None):
        self.result = result
        self.sanitized = sanitized
        self.expected_ns = expected_ns

    def note(
        self,
        klass: str,
        message: str,
        *,
        offset: int = 0,
        fatal: bool = False,
        record_index: int | None = None,
    ) -> None:
        if record_index is not None and record_index < len(self.result.record_spans):
            offset = self.result.record_spans[record_index].outer_start
        self.result.violations.append(
            Violation(klass, offset, message, fatal=fatal, record_index=record_index)
        )

    # -- envelope ------------------------------------------------------------

    def extract(self, root: ET.Element) -> None:
        if root.tag != _q("OAI-PMH"):
            self.note(
                PROTOCOL,
                f"root element is {root.tag}, not an OAI-PMH 2.0 response",
                fatal=True,
            )
            return

        response_date = self._response_date(root)
        base_url, echo = self._request_element(root)

        errors = []
        for err_el in root.findall(_q("error")):
            code = OaiErrorCode.from_wire(err_el.get("code", ""))
            if code is None:
                self.note(PROTOCOL, f"unknown error code {err_el.get('code')!r}")
                continue
            errors.append(OaiError(code, (err_el.text or "").strip()))

        verb = Verb.from_wire(echo.get("verb", ""))
        payload_el = None
        for candidate in Verb:
            el = root.find(_q(candidate.value))
            if el is not None:
                if payload_el is not None:
                    self.note(PROTOCOL, "multiple verb payloads in one response")
                payload_el = el
                payload_verb = candidate
        if payload_el is not None and errors:
            self.note(PROTOCOL, "error and verb payload in the same response")

        if payload_el is None:
            if not errors:
                self.note(PROTOCOL, "response carries neither payload nor error", fatal=True)
                return
            payload = ErrorsPayload(tuple(errors))
        else:
            verb = payload_verb
            payload = self._payload(payload_el, payload_verb)
            if payload is None:
                return

        self.result.response = OaiResponse(
            response_date=response_date,
            base_url=base_url,
            verb=verb,
            payload=payload,
            echo=echo,
        )

    def _response_date(self, root: ET.Element) -> Datestamp:
        el = root.find(_q("responseDate"))
        if el is None or not (el.text or "").strip():
            self.note(PROTOCOL, "missing responseDate")
            return Datestamp(Datestamp.parse("1970-01-01T00:00:00Z").instant)
        text = el.text.strip()
        try:
            return Datestamp.parse(text)
        except ValueError:
            self.note(SCHEMA, f"malformed responseDate {text!r}")
            return Datestamp(Datestamp.parse("1970-01-01T00:00:00Z").instant)

    def _request_element(self, root: ET.Element) -> tuple[str, dict[str, str]]:
        el = root.find(_q("request"))
        if el is None:
            self.note(PROTOCOL, "missing request element")
            return "", {}
        return (el.text or "").strip(), dict(el.attrib)

    # -- payloads ------------------------------------------------------------

    def _payload(self, el: ET.Element, verb: Verb):
        if verb is Verb.IDENTIFY:
            return self._identify(el)
        if verb is Verb.LIST_METADATA_FORMATS:
            return self._formats(el)
        if verb is Verb.LIST_SETS:
            return self._sets(el)
        if verb is Verb.LIST_IDENTIFIERS:
            return self._headers(el)
        if verb is Verb.LIST_RECORDS:
            return RecordsPayload(tuple(self._records(el)), self._token(el))
        record = self._records(el)
        if not record:
            self.note(SCHEMA, "GetRecord response without record")
            return None
        return RecordPayload(record[0])

    def _identify(self, el: ET.Element) -> IdentifyPayload:
        def text_of(name: str, fallback: str = "") -> str:
            child = el.find(_q(name))
            if child is None or not (child.text or "").strip():
                self.note(SCHEMA, f"Identify missing {name}")
                return fallback
            return child.text.strip()

        version = text_of("protocolVersion")
        if version != "2.0":
            self.note(
                PROTOCOL,
                f"unsupported protocolVersion {version!r}; this relay speaks 2.0 only",
                fatal=True,
            )
        granularity = text_of("granularity", "YYYY-MM-DDThh:mm:ssZ")
        if granularity not in _GRANULARITIES:
            self.note(SCHEMA, f"illegal granularity {granularity!r}")
            granularity = "YYYY-MM-DDThh:mm:ssZ"
        deleted_record = text_of("deletedRecord", "no")
        if deleted_record not in _DELETED_RECORD_VALUES:
            self.note(SCHEMA, f"illegal deletedRecord {deleted_record!r}")
            deleted_record = "no"
        earliest_text = text_of("earliestDatestamp", "1970-01-01")
        try:
            earliest = Datestamp.parse(earliest_text)
        except ValueError:
            self.note(SCHEMA, f"malformed earliestDatestamp {earliest_text!r}")
            earliest = Datestamp.parse("1970-01-01")
        emails = tuple(
            (c.text or "").strip() for c in el.findall(_q("adminEmail")) if (c.text or "").strip()
        )
        if not emails:
            self.note(SCHEMA, "Identify missing adminEmail")
        descriptions = tuple(
            self._fragments(el, "description", what="Identify description")
        )
        return IdentifyPayload(
            IdentifyInfo(
                repository_name=text_of("repositoryName"),
                base_url=text_of("baseURL"),
                protocol_version=version,
                admin_emails=emails,
                earliest_datestamp=earliest,
                deleted_record=deleted_record,
                granularity=granularity,
                compressions=tuple(
                    (c.text or "").strip() for c in el.findall(_q("compression"))
                ),
                descriptions=descriptions,
            )
        )

    def _formats(self, el: ET.Element) -> FormatsPayload:
        formats = []
        for fmt_el in el.findall(_q("metadataFormat")):
            prefix = (fmt_el.findtext(_q("metadataPrefix")) or "").strip()
            schema = (fmt_el.findtext(_q("schema")) or "").strip()
            namespace = (fmt_el.findtext(_q("metadataNamespace")) or "").strip()
            if not (prefix and schema and namespace):
                self.note(SCHEMA, "metadataFormat missing prefix, schema or namespace")
                continue
            formats.append(MetadataFormat(prefix, schema, namespace))
        if not formats:
            self.note(SCHEMA, "ListMetadataFormats response without formats")
        prefixes = [f.prefix for f in formats]
        if len(prefixes) != len(set(prefixes)):
            self.note(SCHEMA, "duplicate metadataPrefix in format list")
        return FormatsPayload(tuple(formats))

    def _sets(self, el: ET.Element) -> SetsPayload:
        sets = []
        for set_el in el.findall(_q("set")):
            spec = (set_el.findtext(_q("setSpec")) or "").strip()
            name = (set_el.findtext(_q("setName")) or "").strip()
            if not spec:
                self.note(SCHEMA, "set without setSpec")
                continue
            sets.append(SetInfo(spec, name))
        return SetsPayload(tuple(sets), self._token(el))

    def _headers(self, el: ET.Element) -> HeadersPayload:
        headers = []
        for i, header_el in enumerate(el.findall(_q("header"))):
            header = self._header(header_el, index=None, position=i)
            if header is not None:
                headers.append(header)
        if not headers:
            self.note(SCHEMA, "ListIdentifiers response without headers")
        return HeadersPayload(tuple(headers), self._token(el))

    def _header(
        self, el: ET.Element, index: int | None, position: int
    ) -> RecordHeader | None:
        identifier = (el.findtext(_q("identifier")) or "").strip()
        where = f"record {index}" if index is not None else f"header {position}"
        if not identifier:
            self.note(SCHEMA, f"{where} missing identifier", record_index=index)
            return None
        check = validate_identifier(identifier)
        if not check.valid:
            self.note(
                SCHEMA,
                f"{where} identifier {identifier!r} is not a URI: {check.reason}",
                record_index=index,
            )
            return None
        status = el.get("status")
        if status is not None and status != "deleted":
            self.note(SCHEMA, f"{where} has illegal status {status!r}", record_index=index)
            status = None
        datestamp_text = (el.findtext(_q("datestamp")) or "").strip()
        try:
            datestamp = Datestamp.parse(datestamp_text)
        except ValueError:
            self.note(
                SCHEMA,
                f"{where} has malformed datestamp {datestamp_text!r}",
                record_index=index,
            )
            return None
        set_specs = tuple(
            (c.text or "").strip() for c in el.findall(_q("setSpec")) if (c.text or "").strip()
        )
        return RecordHeader(identifier, datestamp, set_specs, deleted=status == "deleted")

    def _records(self, el: ET.Element) -> list[OaiRecord]:
        record_els = el.findall(_q("record"))
        spans = self.result.record_spans
        if len(record_els) != len(spans):
            self.note(
                MARKUP,
                f"tag scan found {len(spans)} records, parser found {len(record_els)}",
                fatal=True,
            )
            return []
        records = []
        for i, record_el in enumerate(record_els):
            record = self._record(record_el, i)
            if record is not None:
                records.append(record)
        return records

    def _record(self, el: ET.Element, index: int) -> OaiRecord | None:
        header_el = el.find(_q("header"))
        if header_el is None:
            self.note(SCHEMA, f"record {index} missing header", record_index=index)
            return None
        header = self._header(header_el, index=index, position=index)
        if header is None:
            return None

        span = self.result.record_spans[index]
        body = self.sanitized[span.inner_start : span.inner_end]
        try:
            metadata_spans = element_spans(body, b"metadata", offset=span.inner_start)
            about_spans = element_spans(body, b"about", offset=span.inner_start)
        except ScanError as exc:
            self.note(MARKUP, f"record {index}: {exc}", record_index=index)
            return None

        metadata = b""
        if header.deleted:
            if metadata_spans:
                self.note(
                    SCHEMA, f"deleted record {index} carries metadata", record_index=index
                )
                return None
        else:
            if len(metadata_spans) != 1:
                self.note(
                    SCHEMA,
                    f"record {index} has {len(metadata_spans)} metadata elements",
                    record_index=index,
                )
                return None
            metadata = self._slice(metadata_spans[0])
            self._check_metadata_root(el, index)

        abouts = tuple(self._slice(s) for s in about_spans)
        return OaiRecord(header=header, metadata=metadata, abouts=abouts)

    def _check_metadata_root(self, record_el: ET.Element, index: int) -> None:
        metadata_el = record_el.find(_q("metadata"))
        if metadata_el is None:
            return
        children = list(metadata_el)
        if len(children) != 1:
            self.note(
                SCHEMA,
                f"record {index} metadata must contain exactly one element",
                record_index=index,
            )
            return
        if self.expected_ns is None:
            return
        tag = children[0].tag
        namespace = tag[1:].split("}", 1)[0] if tag.startswith("{") else ""
        if namespace != self.expected_ns:
            self.note(
                SCHEMA,
                f"record {index} metadata namespace {namespace!r} does not match "
                f"the requested format ({self.expected_ns})",
                record_index=index,
            )

    def _fragments(self, el: ET.Element, name: str, what: str) -> list[bytes]:
        count = len(el.findall(_q(name)))
        if count == 0:
            return []
        # Locate this element's span to slice its children out of the bytes.
        tag = el.tag.split("}", 1)[1]
        try:
            parent_spans = element_spans(self.sanitized, tag.encode())
        except ScanError:
            self.note(MARKUP, f"cannot delimit {what} fragments")
            return []
        if len(parent_spans) != 1:
            self.note(MARKUP, f"cannot attribute {what} fragments")
            return []
        span = parent_spans[0]
        body = self.sanitized[span.inner_start : span.inner_end]
        try:
            spans = element_spans(body, name.encode(), offset=span.inner_start)
        except ScanError:
            self.note(MARKUP, f"cannot delimit {what} fragments")
            return []
        return [self._slice(s) for s in spans]

    def _slice(self, span: ElementSpan) -> bytes:
        return self.sanitized[span.inner_start : span.inner_end].strip()

    def _token(self, el: ET.Element) -> ResumptionToken | None:
        token_el = el.find(_q("resumptionToken"))
        if token_el is None:
            return None
        size = cursor = None
        expiration = None
        raw_size = token_el.get("completeListSize")
        raw_cursor = token_el.get("cursor")
        raw_exp = token_el.get("expirationDate")
        try:
            if raw_size is not None:
                size = int(raw_size)
            if raw_cursor is not None:
                cursor = int(raw_cursor)
        except ValueError:
            self.note(SCHEMA, "non-numeric resumptionToken attributes")
        if raw_exp is not None:
            try:
                expiration = Datestamp.parse(raw_exp)
            except ValueError:
                self.note(SCHEMA, f"malformed token expirationDate {raw_exp!r}")
        return ResumptionToken(
            token=(token_el.text or "").strip(),
            complete_list_size=size,
            cursor=cursor,
            expiration_date=expiration,
        )
