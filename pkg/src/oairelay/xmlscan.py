"""Byte-level XML region scanner tolerant of the damage the repair stages fix.

This is deliberately not a parser: it splits a byte string into markup and
character-data regions without building a tree, so it keeps working on input
containing invalid UTF-8, bare ampersands, and unquoted attribute values.
A ``<`` is only treated as markup when the following byte could legally start
one (name character, ``/``, ``!`` or ``?``); anything else stays character
data, which mirrors the repair heuristics.
"""

from __future__ import annotations

from dataclasses import dataclass

TEXT = "text"
OPEN = "open"
CLOSE = "close"
COMMENT = "comment"
CDATA = "cdata"
PI = "pi"
DECL = "decl"

_NAME_START = frozenset(
    b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_:"
) | frozenset(range(0x80, 0x100))
_NAME_BREAK = frozenset(b" \t\r\n/>")
_WS = frozenset(b" \t\r\n")


class ScanError(Exception):
    """Raised when element spans cannot be delimited (unbalanced markup)."""


@dataclass(frozen=True)
class Region:
    kind: str
    start: int
    end: int  # exclusive
    truncated: bool = False


@dataclass(frozen=True)
class ElementSpan:
    """Byte extent of one element: outer includes the tags, inner excludes them."""

    outer_start: int
    outer_end: int
    inner_start: int
    inner_end: int


def _is_markup_start(data: bytes, lt: int) -> bool:
    nxt = data[lt + 1 : lt + 2]
    if not nxt:
        return False
    b = nxt[0]
    if b in _NAME_START or b in b"!?":
        return True
    if b == ord("/"):
        after = data[lt + 2 : lt + 3]
        return bool(after) and after[0] in _NAME_START
    return False


def _scan_open_tag(data: bytes, lt: int) -> tuple[int, bool]:
    """Return (end, truncated) for a tag starting at `lt`, honouring quotes."""
    n = len(data)
    i = lt + 1
    quote = 0
    fallback_gt = -1
    while i < n:
        b = data[i]
        if quote:
            if b == quote:
                quote = 0
            elif b == ord(">") and fallback_gt < 0:
                fallback_gt = i
            i += 1
            continue
        if b in b"\"'":
            quote = b
            i += 1
            continue
        if b == ord(">"):
            return i + 1, False
        i += 1
    # EOF inside the tag; if a `>` was skipped inside an unterminated quote,
    # treat the quote as broken and close there.
    if fallback_gt >= 0:
        return fallback_gt + 1, False
    return n, True


def iter_regions(data: bytes):
    """Yield Region objects covering `data` completely, in order."""
    n = len(data)
    i = 0
    search = 0
    while i < n:
        lt = data.find(b"<", search)
        if lt < 0:
            yield Region(TEXT, i, n)
            return
        if not _is_markup_start(data, lt):
            search = lt + 1
            continue
        if lt > i:
            yield Region(TEXT, i, lt)
        head = data[lt : lt + 9]
        if head.startswith(b"<!--"):
            close = data.find(b"-->", lt + 4)
            end, trunc = (close + 3, False) if close >= 0 else (n, True)
            yield Region(COMMENT, lt, end, trunc)
        elif head.startswith(b"<![CDATA["):
            close = data.find(b"]]>", lt + 9)
            end, trunc = (close + 3, False) if close >= 0 else (n, True)
            yield Region(CDATA, lt, end, trunc)
        elif head.startswith(b"<!"):
            close = data.find(b">", lt + 2)
            end, trunc = (close + 1, False) if close >= 0 else (n, True)
            yield Region(DECL, lt, end, trunc)
        elif head.startswith(b"<?"):
            close = data.find(b"?>", lt + 2)
            end, trunc = (close + 2, False) if close >= 0 else (n, True)
            yield Region(PI, lt, end, trunc)
        elif head.startswith(b"</"):
            close = data.find(b">", lt + 2)
            end, trunc = (close + 1, False) if close >= 0 else (n, True)
            yield Region(CLOSE, lt, end, trunc)
        else:
            end, trunc = _scan_open_tag(data, lt)
            yield Region(OPEN, lt, end, trunc)
        i = end
        search = end


def tag_name(data: bytes, region: Region) -> bytes:
    """Element name of an OPEN or CLOSE region (prefix included, if any)."""
    pos = region.start + (2 if region.kind == CLOSE else 1)
    end = pos
    while end < region.end and data[end] not in _NAME_BREAK:
        end += 1
    return data[pos:end]


def is_self_closing(data: bytes, region: Region) -> bool:
    if region.kind != OPEN or region.truncated:
        return False
    body = data[region.start : region.end].rstrip()
    return body.endswith(b"/>")


def element_spans(data: bytes, name: bytes, *, offset: int = 0) -> list[ElementSpan]:
    """All spans of `name` elements at any depth-0 position of `data`.

    Same-name nesting is tracked by depth; occurrences inside comments, CDATA
    or processing instructions are ignored. Raises ScanError when the open
    and close tags for `name` do not balance, since a caller cannot then
    attribute bytes to one element safely.
    """
    spans: list[ElementSpan] = []
    depth = 0
    outer_start = inner_start = 0
    for region in iter_regions(data):
        if region.kind == OPEN and tag_name(data, region) == name:
            if region.truncated:
                raise ScanError(f"unterminated <{name.decode()}> tag")
            if is_self_closing(data, region):
                if depth == 0:
                    spans.append(
                        ElementSpan(
                            region.start + offset,
                            region.end + offset,
                            region.end + offset,
                            region.end + offset,
                        )
                    )
                continue
            depth += 1
            if depth == 1:
                outer_start = region.start
                inner_start = region.end
        elif region.kind == CLOSE and tag_name(data, region) == name:
            if depth == 0:
                raise ScanError(f"unmatched </{name.decode()}>")
            depth -= 1
            if depth == 0:
                spans.append(
                    ElementSpan(
                        outer_start + offset,
                        region.end + offset,
                        inner_start + offset,
                        region.start + offset,
                    )
                )
    if depth != 0:
        raise ScanError(f"unclosed <{name.decode()}> element")
    return spans


def splice_out(data: bytes, spans: list[ElementSpan]) -> bytes:
    """Remove the outer extents of `spans` plus their own line padding from `data`."""
    if not spans:
        return data
    out = bytearray()
    pos = 0
    for span in sorted(spans, key=lambda s: s.outer_start):
        chunk = data[pos : span.outer_start]
        # drop the removed element's leading indentation (not the line break)
        stripped = chunk.rstrip(b" \t")
        if len(chunk) - len(stripped) == span.outer_start - pos:
            chunk = stripped  # all-whitespace gap: collapse it entirely
        elif stripped.endswith(b"\n"):
            chunk = stripped
        out += chunk
        pos = span.outer_end
        # swallow one line break so the result does not accumulate blank lines
        while pos < len(data) and data[pos] in b" \t":
            pos += 1
        if data[pos : pos + 2] == b"\r\n":
            pos += 2
        elif data[pos : pos + 1] == b"\n":
            pos += 1
    out += data[pos:]
    return bytes(out)
