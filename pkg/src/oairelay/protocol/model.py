"""Domain types shared across the proxy, aggregator, gateway and harness."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from oairelay.protocol.datestamp import Datestamp

OAI_NS = "http://www.openarchives.org/OAI/2.0/"
OAI_SCHEMA_LOCATION = (
    "http://www.openarchives.org/OAI/2.0/ "
    "http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd"
)
OAI_DC_NS = "http://www.openarchives.org/OAI/2.0/oai_dc/"
OAI_DC_SCHEMA = "http://www.openarchives.org/OAI/2.0/oai_dc.xsd"
DC_NS = "http://purl.org/dc/elements/1.1/"
PROVENANCE_NS = "http://www.openarchives.org/OAI/2.0/provenance"
PROVENANCE_SCHEMA = "http://www.openarchives.org/OAI/2.0/provenance.xsd"
XSI_NS = "http://www.w3.org/2001/XMLSchema-instance"

#: Metadata namespaces the relay can verify for a given prefix.
KNOWN_FORMAT_NAMESPACES = {"oai_dc": OAI_DC_NS}


class Verb(Enum):
    IDENTIFY = "Identify"
    LIST_METADATA_FORMATS = "ListMetadataFormats"
    LIST_SETS = "ListSets"
    LIST_IDENTIFIERS = "ListIdentifiers"
    LIST_RECORDS = "ListRecords"
    GET_RECORD = "GetRecord"

    @classmethod
    def from_wire(cls, name: str) -> "Verb | None":
        for verb in cls:
            if verb.value == name:
                return verb
        return None


class OaiErrorCode(Enum):
    BAD_ARGUMENT = "badArgument"
    BAD_RESUMPTION_TOKEN = "badResumptionToken"
    BAD_VERB = "badVerb"
    CANNOT_DISSEMINATE_FORMAT = "cannotDisseminateFormat"
    ID_DOES_NOT_EXIST = "idDoesNotExist"
    NO_RECORDS_MATCH = "noRecordsMatch"
    NO_METADATA_FORMATS = "noMetadataFormats"
    NO_SET_HIERARCHY = "noSetHierarchy"

    @classmethod
    def from_wire(cls, name: str) -> "OaiErrorCode | None":
        for code in cls:
            if code.value == name:
                return code
        return None


@dataclass(frozen=True)
class OaiError:
    code: OaiErrorCode
    message: str = ""


@dataclass(frozen=True)
class OaiRequest:
    """A validated request: the argument set is exactly the one legal for the verb."""

    verb: Verb
    identifier: str | None = None
    metadata_prefix: str | None = None
    from_: Datestamp | None = None
    until: Datestamp | None = None
    set_spec: str | None = None
    resumption_token: str | None = None

    def echo_arguments(self) -> dict[str, str]:
        """The wire arguments, for the response's request element."""
        args = {"verb": self.verb.value}
        if self.identifier is not None:
            args["identifier"] = self.identifier
        if self.metadata_prefix is not None:
            args["metadataPrefix"] = self.metadata_prefix
        if self.from_ is not None:
            args["from"] = self.from_.serialize()
        if self.until is not None:
            args["until"] = self.until.serialize()
        if self.set_spec is not None:
            args["set"] = self.set_spec
        if self.resumption_token is not None:
            args["resumptionToken"] = self.resumption_token
        return args


@dataclass(frozen=True)
class RecordHeader:
    identifier: str
    datestamp: Datestamp
    set_specs: tuple[str, ...] = ()
    deleted: bool = False


@dataclass(frozen=True)
class OaiRecord:
    """Header plus opaque metadata/about fragments, byte-preserving."""

    header: RecordHeader
    metadata: bytes = b""
    abouts: tuple[bytes, ...] = ()

    def __post_init__(self):
        if self.header.deleted and self.metadata:
            raise ValueError("deleted records carry no metadata")


@dataclass(frozen=True)
class ProvenanceEntry:
    """One harvest hop; `parent` is the hop this record was acquired through."""

    base_url: str
    origin_identifier: str
    origin_datestamp: Datestamp
    metadata_namespace: str
    harvest_date: Datestamp
    altered: bool = False
    parent: "ProvenanceEntry | None" = None

    def __post_init__(self):
        if self.harvest_date.cmp(self.origin_datestamp) < 0:
            raise ValueError(
                "harvest date precedes origin datestamp: "
                f"{self.harvest_date} < {self.origin_datestamp}"
            )

    def depth(self) -> int:
        entry, n = self, 0
        while entry is not None:
            n += 1
            entry = entry.parent
        return n

    def innermost(self) -> "ProvenanceEntry":
        entry = self
        while entry.parent is not None:
            entry = entry.parent
        return entry


@dataclass(frozen=True)
class MetadataFormat:
    prefix: str
    schema_url: str
    namespace: str


@dataclass(frozen=True)
class ResumptionToken:
    token: str
    complete_list_size: int | None = None
    cursor: int | None = None
    expiration_date: Datestamp | None = None

    @property
    def final(self) -> bool:
        return self.token == ""


@dataclass(frozen=True)
class IdentifyInfo:
    repository_name: str
    base_url: str
    protocol_version: str
    admin_emails: tuple[str, ...]
    earliest_datestamp: Datestamp
    deleted_record: str
    granularity: str
    compressions: tuple[str, ...] = ()
    descriptions: tuple[bytes, ...] = ()


@dataclass(frozen=True)
class SetInfo:
    spec: str
    name: str


# -- typed response payloads ------------------------------------------------


@dataclass(frozen=True)
class IdentifyPayload:
    info: IdentifyInfo


@dataclass(frozen=True)
class FormatsPayload:
    formats: tuple[MetadataFormat, ...]


@dataclass(frozen=True)
class SetsPayload:
    sets: tuple[SetInfo, ...]
    token: ResumptionToken | None = None


@dataclass(frozen=True)
class HeadersPayload:
    headers: tuple[RecordHeader, ...]
    token: ResumptionToken | None = None


@dataclass(frozen=True)
class RecordsPayload:
    records: tuple[OaiRecord, ...]
    token: ResumptionToken | None = None


@dataclass(frozen=True)
class RecordPayload:
    record: OaiRecord


@dataclass(frozen=True)
class ErrorsPayload:
    errors: tuple[OaiError, ...]


Payload = (
    IdentifyPayload
    | FormatsPayload
    | SetsPayload
    | HeadersPayload
    | RecordsPayload
    | RecordPayload
    | ErrorsPayload
)


@dataclass(frozen=True)
class OaiResponse:
    """A full response envelope; `echo` holds the request element's attributes."""

    response_date: Datestamp
    base_url: str
    verb: Verb | None
    payload: Payload
    echo: dict[str, str] = field(default_factory=dict)

    @property
    def errors(self) -> tuple[OaiError, ...]:
        if isinstance(self.payload, ErrorsPayload):
            return self.payload.errors
        return ()

    def error_codes(self) -> set[OaiErrorCode]:
        return {e.code for e in self.errors}
