"""Build and read the provenance "about" fragments that record harvest hops."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from xml.sax.saxutils import escape

from oairelay.protocol.datestamp import Datestamp
from oairelay.protocol.model import PROVENANCE_NS, PROVENANCE_SCHEMA, XSI_NS, ProvenanceEntry


def provenance_fragment(entry: ProvenanceEntry) -> bytes:
    """Serialize a hop chain as a provenance about fragment."""
    lines = [
        f'<provenance xmlns="{PROVENANCE_NS}"',
        f'            xmlns:xsi="{XSI_NS}"',
        f'            xsi:schemaLocation="{PROVENANCE_NS} {PROVENANCE_SCHEMA}">',
    ]
    lines.extend(_origin_lines(entry, indent="  "))
    lines.append("</provenance>")
    return "\n".join(lines).encode()


def _origin_lines(entry: ProvenanceEntry, indent: str) -> list[str]:
    altered = "true" if entry.altered else "false"
    lines = [
        f'{indent}<originDescription harvestDate="{entry.harvest_date.serialize()}" '
        f'altered="{altered}">',
        f"{indent}  <baseURL>{escape(entry.base_url)}</baseURL>",
        f"{indent}  <identifier>{escape(entry.origin_identifier)}</identifier>",
        f"{indent}  <datestamp>{entry.origin_datestamp.serialize()}</datestamp>",
        f"{indent}  <metadataNamespace>{escape(entry.metadata_namespace)}</metadataNamespace>",
    ]
    if entry.parent is not None:
        lines.extend(_origin_lines(entry.parent, indent + "  "))
    lines.append(f"{indent}</originDescription>")
    return lines


def parse_provenance(fragment: bytes) -> ProvenanceEntry | None:
    """Decode a provenance fragment, or None if the fragment is something else.

    Raises ValueError when the fragment claims to be provenance but is not
    decodable into a hop chain.
    """
    try:
        root = ET.fromstring(fragment)
    except ET.ParseError:
        return None
    if root.tag != f"{{{PROVENANCE_NS}}}provenance":
        return None
    origin = root.find(f"{{{PROVENANCE_NS}}}originDescription")
    if origin is None:
        raise ValueError("provenance fragment without originDescription")
    return _parse_origin(origin)


def _parse_origin(el: ET.Element) -> ProvenanceEntry:
    def text_of(name: str) -> str:
        child = el.find(f"{{{PROVENANCE_NS}}}{name}")
        if child is None or child.text is None:
            raise ValueError(f"originDescription missing {name}")
        return child.text.strip()

    harvest_date = el.get("harvestDate")
    if harvest_date is None:
        raise ValueError("originDescription missing harvestDate")
    nested = el.find(f"{{{PROVENANCE_NS}}}originDescription")
    return ProvenanceEntry(
        base_url=text_of("baseURL"),
        origin_identifier=text_of("identifier"),
        origin_datestamp=Datestamp.parse(text_of("datestamp")),
        metadata_namespace=text_of("metadataNamespace"),
        harvest_date=Datestamp.parse(harvest_date),
        altered=el.get("altered", "false") == "true",
        parent=_parse_origin(nested) if nested is not None else None,
    )


def find_provenance(abouts: tuple[bytes, ...]) -> tuple[int | None, ProvenanceEntry | None]:
    """Locate the provenance about among a record's about fragments."""
    for i, fragment in enumerate(abouts):
        try:
            entry = parse_provenance(fragment)
        except ValueError:
            entry = None
        if entry is not None:
            return i, entry
    return None, None
