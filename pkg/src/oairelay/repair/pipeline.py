"""End-to-end repair of one response body.

Stages run in a fixed order — byte encoding first, then character-data
escaping, then attribute quoting — because each stage assumes the previous
one's output. After byte repairs the body is parsed and structurally
checked; records that still violate the protocol are removed whole, and
problems outside any record make the response unrepairable.

A clean body passes through byte-identical: the pipeline never re-serializes.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from oairelay.protocol.model import KNOWN_FORMAT_NAMESPACES
from oairelay.protocol.parse import PROTOCOL, SCHEMA, ParseResult, parse_response
from oairelay.repair.records import drop_records
from oairelay.repair.report import RepairReport
from oairelay.xmlscan import ScanError, element_spans

CLEAN = "clean"
REPAIRED = "repaired"
UNREPAIRABLE = "unrepairable"


@dataclass
class RepairOutcome:
    #: final body to forward; None when the response is unrepairable
    body: bytes | None
    status: str
    report: RepairReport
    parse: ParseResult | None = None
    #: original record index -> True when that surviving record's bytes changed
    record_alterations: dict[int, bool] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.body is not None


def expected_namespace_for(metadata_prefix: str | None) -> str | None:
    if metadata_prefix is None:
        return None
    return KNOWN_FORMAT_NAMESPACES.get(metadata_prefix)


def repair_response(
    body: bytes, *, metadata_prefix: str | None = None
) -> RepairOutcome:
    """Repair one response body, dropping records that cannot be fixed."""
    result = parse_response(
        body, expected_metadata_namespace=expected_namespace_for(metadata_prefix)
    )
    report = RepairReport(
        utf8_fixes=list(result.utf8_fixes),
        entity_fixes=list(result.entity_fixes),
        markup_fixes=list(result.markup_fixes),
        residual_violations=[
            v
            for v in result.violations
            if v.klass in (SCHEMA, PROTOCOL) or v.fatal
        ],
    )

    if result.fatal or result.response is None:
        return RepairOutcome(None, UNREPAIRABLE, report, result)

    repaired = result.sanitized
    doomed = set(result.record_violations())
    had_records = bool(result.record_spans)

    if doomed:
        if len(doomed) == len(result.record_spans):
            # Nothing worth forwarding would remain.
            return RepairOutcome(None, UNREPAIRABLE, report, result)
        repaired, dropped_ids = drop_records(repaired, result.record_spans, doomed)
        report.dropped_records.extend(dropped_ids)
        try:
            ET.fromstring(repaired)
        except ET.ParseError:
            return RepairOutcome(None, UNREPAIRABLE, report, result)

    envelope_problems = [
        v
        for v in result.violations
        if v.klass in (SCHEMA, PROTOCOL) and v.record_index is None
    ]
    if envelope_problems:
        return RepairOutcome(None, UNREPAIRABLE, report, result)

    if repaired == body:
        return RepairOutcome(body, CLEAN, report, result)

    alterations = _attribute_alterations(body, repaired, result, doomed, had_records)
    return RepairOutcome(repaired, REPAIRED, report, result, alterations)


def _attribute_alterations(
    original: bytes,
    repaired: bytes,
    result: ParseResult,
    doomed: set[int],
    had_records: bool,
) -> dict[int, bool]:
    """Work out which surviving records actually changed."""
    if not had_records:
        return {}
    surviving = [i for i in range(len(result.record_spans)) if i not in doomed]
    try:
        original_spans = element_spans(original, b"record")
        final_spans = element_spans(repaired, b"record")
    except ScanError:
        return {i: True for i in surviving}
    if len(original_spans) != len(result.record_spans) or len(final_spans) != len(surviving):
        return {i: True for i in surviving}
    alterations: dict[int, bool] = {}
    for position, orig_index in enumerate(surviving):
        before = original[
            original_spans[orig_index].outer_start : original_spans[orig_index].outer_end
        ]
        after = repaired[
            final_spans[position].outer_start : final_spans[position].outer_end
        ]
        alterations[orig_index] = before != after
    return alterations
