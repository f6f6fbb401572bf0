"""Deterministic OAI-PMH 2.0 response serialization.

Metadata, about and description fragments are embedded byte-for-byte; only
the envelope around them is generated here. Output is stable for identical
input, which the proxy's transparency guarantee relies on.
"""

from __future__ import annotations

from xml.sax.saxutils import escape, quoteattr

from oairelay.protocol.model import (
    OAI_NS,
    OAI_SCHEMA_LOCATION,
    XSI_NS,
    ErrorsPayload,
    FormatsPayload,
    HeadersPayload,
    IdentifyPayload,
    OaiRecord,
    OaiResponse,
    RecordHeader,
    RecordPayload,
    RecordsPayload,
    ResumptionToken,
    SetsPayload,
)

_ARG_ORDER = ("verb", "identifier", "metadataPrefix", "from", "until", "set", "resumptionToken")

CONTENT_TYPE = "text/xml; charset=utf-8"


def serialize_response(response: OaiResponse) -> bytes:
    out: list[bytes] = [b'<?xml version="1.0" encoding="UTF-8"?>']
    out.append(
        f'<OAI-PMH xmlns="{OAI_NS}"\n'
        f'         xmlns:xsi="{XSI_NS}"\n'
        f'         xsi:schemaLocation="{OAI_SCHEMA_LOCATION}">'.encode()
    )
    out.append(f"  <responseDate>{response.response_date.serialize()}</responseDate>".encode())
    attrs = "".join(
        f" {name}={quoteattr(response.echo[name])}"
        for name in _ARG_ORDER
        if name in response.echo
    )
    out.append(f"  <request{attrs}>{escape(response.base_url)}</request>".encode())

    payload = response.payload
    if isinstance(payload, ErrorsPayload):
        for err in payload.errors:
            out.append(
                f'  <error code="{err.code.value}">{escape(err.message)}</error>'.encode()
            )
    elif isinstance(payload, IdentifyPayload):
        out.extend(_identify_lines(payload))
    elif isinstance(payload, FormatsPayload):
        out.append(b"  <ListMetadataFormats>")
        for fmt in payload.formats:
            out.append(b"    <metadataFormat>")
            out.append(f"      <metadataPrefix>{escape(fmt.prefix)}</metadataPrefix>".encode())
            out.append(f"      <schema>{escape(fmt.schema_url)}</schema>".encode())
            out.append(
                f"      <metadataNamespace>{escape(fmt.namespace)}</metadataNamespace>".encode()
            )
            out.append(b"    </metadataFormat>")
        out.append(b"  </ListMetadataFormats>")
    elif isinstance(payload, SetsPayload):
        out.append(b"  <ListSets>")
        for s in payload.sets:
            out.append(b"    <set>")
            out.append(f"      <setSpec>{escape(s.spec)}</setSpec>".encode())
            out.append(f"      <setName>{escape(s.name)}</setName>".encode())
            out.append(b"    </set>")
        _append_token(out, payload.token, indent="    ")
        out.append(b"  </ListSets>")
    elif isinstance(payload, HeadersPayload):
        out.append(b"  <ListIdentifiers>")
        for header in payload.headers:
            out.extend(_header_lines(header, indent="    "))
        _append_token(out, payload.token, indent="    ")
        out.append(b"  </ListIdentifiers>")
    elif isinstance(payload, RecordsPayload):
        out.append(b"  <ListRecords>")
        for record in payload.records:
            out.extend(_record_lines(record, indent="    "))
        _append_token(out, payload.token, indent="    ")
        out.append(b"  </ListRecords>")
    elif isinstance(payload, RecordPayload):
        out.append(b"  <GetRecord>")
        out.extend(_record_lines(payload.record, indent="    "))
        out.append(b"  </GetRecord>")
    else:  # pragma: no cover - payload union is closed
        raise TypeError(f"unknown payload type: {type(payload).__name__}")

    out.append(b"</OAI-PMH>")
    return b"\n".join(out) + b"\n"


def _identify_lines(payload: IdentifyPayload) -> list[bytes]:
    info = payload.info
    lines = [b"  <Identify>"]
    lines.append(f"    <repositoryName>{escape(info.repository_name)}</repositoryName>".encode())
    lines.append(f"    <baseURL>{escape(info.base_url)}</baseURL>".encode())
    lines.append(
        f"    <protocolVersion>{escape(info.protocol_version)}</protocolVersion>".encode()
    )
    for email in info.admin_emails:
        lines.append(f"    <adminEmail>{escape(email)}</adminEmail>".encode())
    lines.append(
        f"    <earliestDatestamp>{info.earliest_datestamp.serialize()}</earliestDatestamp>".encode()
    )
    lines.append(f"    <deletedRecord>{escape(info.deleted_record)}</deletedRecord>".encode())
    lines.append(f"    <granularity>{escape(info.granularity)}</granularity>".encode())
    for compression in info.compressions:
        lines.append(f"    <compression>{escape(compression)}</compression>".encode())
    for fragment in info.descriptions:
        lines.append(b"    <description>")
        lines.append(fragment)
        lines.append(b"    </description>")
    lines.append(b"  </Identify>")
    return lines


def _header_lines(header: RecordHeader, indent: str) -> list[bytes]:
    ind = indent.encode()
    status = b' status="deleted"' if header.deleted else b""
    lines = [ind + b"<header" + status + b">"]
    lines.append(ind + f"  <identifier>{escape(header.identifier)}</identifier>".encode())
    lines.append(ind + f"  <datestamp>{header.datestamp.serialize()}</datestamp>".encode())
    for spec in header.set_specs:
        lines.append(ind + f"  <setSpec>{escape(spec)}</setSpec>".encode())
    lines.append(ind + b"</header>")
    return lines


def _record_lines(record: OaiRecord, indent: str) -> list[bytes]:
    ind = indent.encode()
    lines = [ind + b"<record>"]
    lines.extend(_header_lines(record.header, indent + "  "))
    if not record.header.deleted:
        lines.append(ind + b"  <metadata>")
        lines.append(record.metadata)
        lines.append(ind + b"  </metadata>")
    for about in record.abouts:
        lines.append(ind + b"  <about>")
        lines.append(about)
        lines.append(ind + b"  </about>")
    lines.append(ind + b"</record>")
    return lines


def _append_token(out: list[bytes], token: ResumptionToken | None, indent: str) -> None:
    if token is None:
        return
    attrs = ""
    if token.expiration_date is not None:
        attrs += f' expirationDate="{token.expiration_date.serialize()}"'
    if token.complete_list_size is not None:
        attrs += f' completeListSize="{token.complete_list_size}"'
    if token.cursor is not None:
        attrs += f' cursor="{token.cursor}"'
    out.append(
        f"{indent}<resumptionToken{attrs}>{escape(token.token)}</resumptionToken>".encode()
    )
