"""Quote unquoted attribute values; never move, insert or delete elements."""

from __future__ import annotations

from oairelay.repair.report import Fix
from oairelay.xmlscan import OPEN, PI, iter_regions

_WS = b" \t\r\n"


def repair_markup(body: bytes) -> tuple[bytes, list[Fix]]:
    fixes = _scan(body)
    if not fixes:
        return body, []
    out = bytearray()
    pos = 0
    for fix in fixes:
        out += body[pos : fix.offset]
        out += fix.replacement
        pos = fix.offset + len(fix.original)
    out += body[pos:]
    return bytes(out), fixes


def detect_unquoted_attributes(body: bytes) -> list[Fix]:
    return _scan(body)


def _scan(body: bytes) -> list[Fix]:
    fixes: list[Fix] = []
    for region in iter_regions(body):
        if region.kind not in (OPEN, PI) or region.truncated:
            continue
        fixes.extend(_scan_tag(body, region.start, region.end))
    return fixes


def _scan_tag(body: bytes, start: int, end: int) -> list[Fix]:
    fixes: list[Fix] = []
    i = start + 1
    # skip the element name
    while i < end and body[i] not in _WS + b"/>":
        i += 1
    while i < end:
        while i < end and body[i] in _WS:
            i += 1
        if i >= end or body[i : i + 1] in (b">", b"") or body[i : i + 2] in (b"/>", b"?>"):
            break
        # attribute name
        name_start = i
        while i < end and body[i] not in _WS + b"=>/":
            i += 1
        if i == name_start:
            i += 1
            continue
        while i < end and body[i] in _WS:
            i += 1
        if i >= end or body[i] != ord("="):
            continue  # bare attribute; not fixable by quoting
        i += 1
        while i < end and body[i] in _WS:
            i += 1
        if i >= end:
            break
        if body[i] in b"\"'":
            quote = body[i]
            i += 1
            while i < end and body[i] != quote:
                i += 1
            i += 1
            continue
        value_start = i
        while i < end and body[i] not in _WS + b">":
            i += 1
        value = body[value_start:i]
        # a trailing slash belongs to "/>", not the value
        if value.endswith(b"/") and body[i : i + 1] == b">":
            value = value[:-1]
        if value:
            fixes.append(Fix(value_start, value, b'"' + value + b'"'))
    return fixes
