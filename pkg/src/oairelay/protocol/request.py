"""Request-side argument validation for the six OAI-PMH 2.0 verbs."""

from __future__ import annotations

import re
from collections.abc import Mapping

from oairelay.protocol.datestamp import Datestamp
from oairelay.protocol.identifiers import validate_identifier
from oairelay.protocol.model import OaiError, OaiErrorCode, OaiRequest, Verb

_PREFIX_RE = re.compile(r"^[A-Za-z0-9\-_.!~*'()]+$")

# verb -> (required, optional) argument names; resumptionToken handled separately
ARGUMENT_TABLE: dict[Verb, tuple[frozenset[str], frozenset[str]]] = {
    Verb.IDENTIFY: (frozenset(), frozenset()),
    Verb.LIST_METADATA_FORMATS: (frozenset(), frozenset({"identifier"})),
    Verb.LIST_SETS: (frozenset(), frozenset()),
    Verb.GET_RECORD: (frozenset({"identifier", "metadataPrefix"}), frozenset()),
    Verb.LIST_IDENTIFIERS: (
        frozenset({"metadataPrefix"}),
        frozenset({"from", "until", "set"}),
    ),
    Verb.LIST_RECORDS: (
        frozenset({"metadataPrefix"}),
        frozenset({"from", "until", "set"}),
    ),
}

#: Verbs that may be continued with a resumptionToken (then exclusive of all else).
TOKEN_VERBS = frozenset({Verb.LIST_SETS, Verb.LIST_IDENTIFIERS, Verb.LIST_RECORDS})

_ALL_ARGS = frozenset(
    {"verb", "identifier", "metadataPrefix", "from", "until", "set", "resumptionToken"}
)


def _bad(message: str) -> OaiError:
    return OaiError(OaiErrorCode.BAD_ARGUMENT, message)


def parse_request(params: Mapping[str, object]) -> OaiRequest | OaiError:
    """Validate URL-decoded query parameters into an OaiRequest.

    Accepts values as strings or as lists of strings (the shape produced by
    `urllib.parse.parse_qs`); a repeated argument is a badArgument.
    """
    flat: dict[str, str] = {}
    for key, value in params.items():
        if isinstance(value, (list, tuple)):
            if len(value) != 1:
                return _bad(f"repeated argument: {key}")
            value = value[0]
        flat[key] = str(value)

    verb_name = flat.pop("verb", None)
    if verb_name is None:
        return OaiError(OaiErrorCode.BAD_VERB, "missing verb argument")
    verb = Verb.from_wire(verb_name)
    if verb is None:
        return OaiError(OaiErrorCode.BAD_VERB, f"unknown verb: {verb_name}")

    unknown = set(flat) - _ALL_ARGS
    if unknown:
        return _bad(f"unknown argument: {sorted(unknown)[0]}")

    token = flat.get("resumptionToken")
    if token is not None:
        if verb not in TOKEN_VERBS:
            return _bad(f"resumptionToken is not legal for {verb.value}")
        if len(flat) > 1:
            others = sorted(k for k in flat if k != "resumptionToken")
            return _bad(f"resumptionToken is exclusive of {others[0]}")
        return OaiRequest(verb=verb, resumption_token=token)

    required, optional = ARGUMENT_TABLE[verb]
    present = set(flat)
    missing = required - present
    if missing:
        return _bad(f"missing argument: {sorted(missing)[0]}")
    illegal = present - required - optional
    if illegal:
        return _bad(f"illegal argument for {verb.value}: {sorted(illegal)[0]}")

    identifier = flat.get("identifier")
    if identifier is not None:
        check = validate_identifier(identifier)
        if not check.valid:
            return _bad(f"identifier is not a URI: {check.reason}")

    prefix = flat.get("metadataPrefix")
    if prefix is not None and not _PREFIX_RE.match(prefix):
        return _bad(f"illegal metadataPrefix: {prefix!r}")

    from_ = until = None
    try:
        if "from" in flat:
            from_ = Datestamp.parse(flat["from"])
    except ValueError as exc:
        return _bad(str(exc))
    try:
        if "until" in flat:
            until = Datestamp.parse(flat["until"])
    except ValueError as exc:
        return _bad(str(exc))
    if from_ is not None and until is not None:
        if from_.granularity is not until.granularity:
            return _bad("from and until must share one granularity")
        if from_.cmp(until) > 0:
            return _bad("from is later than until")

    return OaiRequest(
        verb=verb,
        identifier=identifier,
        metadata_prefix=prefix,
        from_=from_,
        until=until,
        set_spec=flat.get("set"),
    )
