"""Locating and removing individual records from a response body.

Records that still violate the protocol after byte-level repairs cannot be
fixed in place, but the response around them is usually fine. These helpers
cut whole ``<record>`` elements out of the byte stream so the surviving
records pass through untouched.
"""

from __future__ import annotations

import re

from oairelay.xmlscan import ElementSpan, splice_out

_IDENTIFIER_RE = re.compile(rb"<identifier(?:\s[^>]*)?>\s*(.*?)\s*</identifier>", re.DOTALL)


def span_identifier(body: bytes, span: ElementSpan) -> str:
    """Best-effort identifier of the record occupying `span`, for reporting."""
    match = _IDENTIFIER_RE.search(body[span.outer_start : span.outer_end])
    if not match:
        return "(unidentified)"
    return match.group(1).decode("utf-8", "replace")


def drop_records(
    body: bytes, spans: list[ElementSpan], indices: set[int]
) -> tuple[bytes, list[str]]:
    """Remove the records at `indices`; returns the new body and their ids."""
    doomed = sorted(i for i in indices if 0 <= i < len(spans))
    dropped_ids = [span_identifier(body, spans[i]) for i in doomed]
    new_body = splice_out(body, [spans[i] for i in doomed])
    return new_body, dropped_ids
