"""Escape markup characters that appear bare inside character data.

Only the five predefined XML entities and numeric character references are
recognized; anything else after `&` is treated as a bare ampersand. A `<` in
character data is already known to be bare, because the region scanner only
classifies `<` as markup when what follows could start a tag. Markup regions
are never touched.
"""

from __future__ import annotations

import re

from oairelay.repair.report import Fix
from oairelay.xmlscan import TEXT, iter_regions

_ENTITY_RE = re.compile(rb"&(amp|lt|gt|quot|apos|#[0-9]+|#x[0-9A-Fa-f]+);")


def repair_entities(body: bytes) -> tuple[bytes, list[Fix]]:
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


def detect_bare_markup_chars(body: bytes) -> list[Fix]:
    """The fixes repair_entities would apply, without applying them."""
    return _scan(body)


def _scan(body: bytes) -> list[Fix]:
    fixes: list[Fix] = []
    for region in iter_regions(body):
        if region.kind != TEXT:
            continue
        i = region.start
        while i < region.end:
            b = body[i]
            if b == ord("&"):
                m = _ENTITY_RE.match(body, i)
                if m is None:
                    fixes.append(Fix(i, b"&", b"&amp;"))
                    i += 1
                else:
                    i = m.end()
            elif b == ord("<"):
                fixes.append(Fix(i, b"<", b"&lt;"))
                i += 1
            else:
                i += 1
    return fixes
