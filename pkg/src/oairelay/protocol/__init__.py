"""OAI-PMH 2.0 wire model: types, request parsing, response parse/serialize."""

from oairelay.protocol.datestamp import Datestamp, Granularity
from oairelay.protocol.model import (
    DC_NS,
    OAI_DC_NS,
    OAI_NS,
    IdentifyInfo,
    MetadataFormat,
    OaiError,
    OaiErrorCode,
    OaiRecord,
    OaiRequest,
    ProvenanceEntry,
    RecordHeader,
    ResumptionToken,
    Verb,
)

__all__ = [
    "Datestamp",
    "Granularity",
    "Verb",
    "OaiRequest",
    "OaiError",
    "OaiErrorCode",
    "OaiRecord",
    "RecordHeader",
    "ResumptionToken",
    "MetadataFormat",
    "IdentifyInfo",
    "ProvenanceEntry",
    "OAI_NS",
    "OAI_DC_NS",
    "DC_NS",
]
