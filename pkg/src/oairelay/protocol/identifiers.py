"""URI-syntax validation for record identifiers."""

from __future__ import annotations

import re
from dataclasses import dataclass

_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:")
# unreserved + reserved + "%" (checked separately for valid escapes)
_URI_CHARS = re.compile(r"^[A-Za-z0-9\-._~:/?#\[\]@!$&'()*+,;=%]*$")
_PCT_RE = re.compile(r"%(?![0-9A-Fa-f]{2})")
_OAI_SHAPE_RE = re.compile(
    r"^oai:[A-Za-z][A-Za-z0-9\-]*(\.[A-Za-z][A-Za-z0-9\-]+)+:.+$"
)


@dataclass(frozen=True)
class IdentifierCheck:
    valid: bool
    oai_shape: bool = False
    reason: str | None = None


def validate_identifier(identifier: str) -> IdentifierCheck:
    """URI-syntactic validity, plus a non-fatal flag for the oai:{ns}:{local} shape."""
    if not identifier:
        return IdentifierCheck(False, reason="empty identifier")
    if not _URI_CHARS.match(identifier):
        bad = next(c for c in identifier if not _URI_CHARS.match(c))
        return IdentifierCheck(False, reason=f"illegal URI character {bad!r}")
    if _PCT_RE.search(identifier):
        return IdentifierCheck(False, reason="malformed percent-encoding")
    if not _SCHEME_RE.match(identifier):
        return IdentifierCheck(False, reason="missing URI scheme")
    return IdentifierCheck(True, oai_shape=bool(_OAI_SHAPE_RE.match(identifier)))
