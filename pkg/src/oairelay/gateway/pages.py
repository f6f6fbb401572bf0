"""HTML rendering for record and index pages.

The audience is crawlers, so the markup is minimal and semantic: one
article per record with a definition list of Dublin Core fields, and plain
link lists for navigation. Record URLs percent-encode every character
outside the unreserved set, making path segment and identifier a bijection.
"""

from __future__ import annotations

import html
import xml.etree.ElementTree as ET
from urllib.parse import quote, unquote

from oairelay.protocol.model import OaiRecord, RecordHeader

DC_NS = "http://purl.org/dc/elements/1.1/"

#: DC elements shown on a record page, in display order
_FIELDS = ("title", "creator", "date", "description")


def record_path(repository_id: str, identifier: str) -> str:
    return f"/gw/{repository_id}/{quote(identifier, safe='')}"


def index_path(repository_id: str, page: int) -> str:
    return f"/gw/{repository_id}/index/{page}"


def identifier_from_segment(segment: str) -> str:
    return unquote(segment)


def _dc_values(metadata: bytes) -> dict[str, list[str]]:
    values: dict[str, list[str]] = {name: [] for name in _FIELDS}
    values["identifier"] = []
    try:
        root = ET.fromstring(metadata)
    except ET.ParseError:
        return values
    for element in root.iter():
        if not element.tag.startswith("{" + DC_NS + "}"):
            continue
        name = element.tag.split("}", 1)[1]
        if name in values and element.text and element.text.strip():
            values[name].append(element.text.strip())
    return values


def render_record_page(
    repository_id: str,
    record: OaiRecord,
    prev_identifier: str | None,
    next_identifier: str | None,
) -> bytes:
    identifier = record.header.identifier
    dc = _dc_values(record.metadata)
    title = dc["title"][0] if dc["title"] else identifier
    out = [
        "<!DOCTYPE html>",
        '<html lang="en">',
        "<head>",
        '<meta charset="utf-8">',
        f"<title>{html.escape(title)}</title>",
        "</head>",
        "<body>",
        "<article>",
        f"<h1>{html.escape(title)}</h1>",
        "<dl>",
        f"<dt>Identifier</dt><dd>{html.escape(identifier)}</dd>",
        f"<dt>Datestamp</dt><dd>{record.header.datestamp.serialize()}</dd>",
    ]
    for name in _FIELDS:
        for value in dc[name]:
            out.append(
                f"<dt>{name.capitalize()}</dt><dd>{html.escape(value)}</dd>"
            )
    out.append("</dl>")
    resource = next(
        (v for v in dc["identifier"] if v.startswith(("http://", "https://"))), None
    )
    if resource:
        out.append(
            f'<p><a rel="item" href="{html.escape(resource, quote=True)}">resource</a></p>'
        )
    out.append("</article>")
    out.append("<nav>")
    if prev_identifier is not None:
        out.append(
            f'<a rel="prev" href="{_href(record_path(repository_id, prev_identifier))}">previous</a>'
        )
    if next_identifier is not None:
        out.append(
            f'<a rel="next" href="{_href(record_path(repository_id, next_identifier))}">next</a>'
        )
    out.append(
        f'<a rel="index" href="{_href(index_path(repository_id, 0))}">index</a>'
    )
    out.append("</nav>")
    out.append("</body>")
    out.append("</html>")
    return ("\n".join(out) + "\n").encode()


def render_index_page(
    repository_id: str,
    page: int,
    headers: list[RecordHeader],
    page_count: int,
) -> bytes:
    out = [
        "<!DOCTYPE html>",
        '<html lang="en">',
        "<head>",
        '<meta charset="utf-8">',
        f"<title>{html.escape(repository_id)} — index {page}</title>",
        "</head>",
        "<body>",
        f"<h1>{html.escape(repository_id)} — index page {page}</h1>",
        "<ul>",
    ]
    for header in headers:
        href = _href(record_path(repository_id, header.identifier))
        out.append(f'<li><a href="{href}">{html.escape(header.identifier)}</a></li>')
    out.append("</ul>")
    out.append("<nav>")
    if page > 0:
        out.append(
            f'<a rel="prev" href="{_href(index_path(repository_id, page - 1))}">previous</a>'
        )
    if page + 1 < page_count:
        out.append(
            f'<a rel="next" href="{_href(index_path(repository_id, page + 1))}">next</a>'
        )
    out.append("</nav>")
    out.append("</body>")
    out.append("</html>")
    return ("\n".join(out) + "\n").encode()


def _href(path: str) -> str:
    return html.escape(path, quote=True)


def render_robots(excluded_repository_ids: list[str]) -> bytes:
    lines = ["User-agent: *"]
    if excluded_repository_ids:
        for repository_id in sorted(excluded_repository_ids):
            lines.append(f"Disallow: /gw/{repository_id}/")
    else:
        lines.append("Disallow:")
    return ("\n".join(lines) + "\n").encode()


def render_sitemap(base_url: str, index_pages: dict[str, int]) -> bytes:
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<urlset xmlns="http://www.sitemaps.org/schemas/sitemap/0.9">',
    ]
    for repository_id in sorted(index_pages):
        for page in range(index_pages[repository_id]):
            loc = html.escape(base_url + index_path(repository_id, page), quote=True)
            out.append(f"<url><loc>{loc}</loc></url>")
    out.append("</urlset>")
    return ("\n".join(out) + "\n").encode()
