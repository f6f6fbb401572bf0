"""Reference answers computed the straightforward way.

This module deliberately avoids the package's own protocol code: it walks a
repository with plain HTTP requests and the standard XML parser, so tests
can compare the stack's output against an implementation that shares none
of its code paths. It only understands well-formed responses — point it at
a fault-free endpoint (a clean provider, or an aggregator).
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import requests

_OAI = "{http://www.openarchives.org/OAI/2.0/}"


@dataclass(frozen=True)
class OracleRecord:
    identifier: str
    datestamp: str
    deleted: bool
    #: attribute-order-independent rendering of the metadata payload
    canonical_metadata: str


def canonical_xml(node: ET.Element) -> str:
    attrs = "".join(
        f" {name}={node.attrib[name]!r}" for name in sorted(node.attrib)
    )
    text = (node.text or "").strip()
    children = "".join(canonical_xml(child) for child in node)
    tail = (node.tail or "").strip()
    return f"<{node.tag}{attrs}>{text}{children}</{node.tag}>{tail}"


def _fetch(url: str, params: dict, session: requests.Session | None) -> ET.Element:
    http = (session or requests).get(url, params=params, timeout=30)
    http.raise_for_status()
    return ET.fromstring(http.content)


def _error_codes(root: ET.Element) -> set[str]:
    return {e.get("code", "") for e in root.findall(f"{_OAI}error")}


def harvest(
    url: str,
    metadata_prefix: str = "oai_dc",
    *,
    from_: str | None = None,
    until: str | None = None,
    session: requests.Session | None = None,
) -> dict[str, OracleRecord]:
    """Full ListRecords walk; identifier -> reference record."""
    params: dict[str, str] = {"verb": "ListRecords", "metadataPrefix": metadata_prefix}
    if from_:
        params["from"] = from_
    if until:
        params["until"] = until
    out: dict[str, OracleRecord] = {}
    while True:
        root = _fetch(url, params, session)
        codes = _error_codes(root)
        if codes == {"noRecordsMatch"}:
            return out
        if codes:
            raise AssertionError(f"unexpected protocol error: {sorted(codes)}")
        container = root.find(f"{_OAI}ListRecords")
        if container is None:
            raise AssertionError("response carries no ListRecords")
        for record in container.findall(f"{_OAI}record"):
            header = record.find(f"{_OAI}header")
            identifier = header.findtext(f"{_OAI}identifier", "").strip()
            datestamp = header.findtext(f"{_OAI}datestamp", "").strip()
            deleted = header.get("status") == "deleted"
            metadata = record.find(f"{_OAI}metadata")
            payload = ""
            if metadata is not None and len(metadata):
                payload = canonical_xml(metadata[0])
            out[identifier] = OracleRecord(identifier, datestamp, deleted, payload)
        token = container.findtext(f"{_OAI}resumptionToken", "")
        if not (token or "").strip():
            return out
        params = {"verb": "ListRecords", "resumptionToken": token.strip()}


def list_identifiers(
    url: str,
    metadata_prefix: str = "oai_dc",
    *,
    session: requests.Session | None = None,
) -> list[tuple[str, str, bool]]:
    """Full ListIdentifiers walk: (identifier, datestamp, deleted) per header."""
    params: dict[str, str] = {
        "verb": "ListIdentifiers",
        "metadataPrefix": metadata_prefix,
    }
    out: list[tuple[str, str, bool]] = []
    while True:
        root = _fetch(url, params, session)
        codes = _error_codes(root)
        if codes == {"noRecordsMatch"}:
            return out
        if codes:
            raise AssertionError(f"unexpected protocol error: {sorted(codes)}")
        container = root.find(f"{_OAI}ListIdentifiers")
        if container is None:
            raise AssertionError("response carries no ListIdentifiers")
        for header in container.findall(f"{_OAI}header"):
            out.append(
                (
                    header.findtext(f"{_OAI}identifier", "").strip(),
                    header.findtext(f"{_OAI}datestamp", "").strip(),
                    header.get("status") == "deleted",
                )
            )
        token = container.findtext(f"{_OAI}resumptionToken", "")
        if not (token or "").strip():
            return out
        params = {"verb": "ListIdentifiers", "resumptionToken": token.strip()}


def get_record_body(
    url: str,
    identifier: str,
    metadata_prefix: str = "oai_dc",
    *,
    session: requests.Session | None = None,
) -> bytes:
    http = (session or requests).get(
        url,
        params={
            "verb": "GetRecord",
            "identifier": identifier,
            "metadataPrefix": metadata_prefix,
        },
        timeout=30,
    )
    http.raise_for_status()
    return http.content


_METADATA_BLOCK = re.compile(rb"<metadata>\n(.*?)\n\s*</metadata>", re.S)


def metadata_blocks(body: bytes) -> list[bytes]:
    """Raw metadata payloads as they appear on the wire, byte-exact."""
    return [m.group(1) for m in _METADATA_BLOCK.finditer(body)]
