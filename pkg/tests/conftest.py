"""Shared builders for hand-rolled response bodies used across the test suite."""

from __future__ import annotations

import textwrap

import pytest

OAI_NS = "http://www.openarchives.org/OAI/2.0/"
OAI_DC_NS = "http://www.openarchives.org/OAI/2.0/oai_dc/"
DC_NS = "http://purl.org/dc/elements/1.1/"

ENVELOPE = """<?xml version="1.0" encoding="UTF-8"?>
<OAI-PMH xmlns="http://www.openarchives.org/OAI/2.0/"
         xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance"
         xsi:schemaLocation="http://www.openarchives.org/OAI/2.0/ http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd">
  <responseDate>{response_date}</responseDate>
  <request {request_attrs}>{base_url}</request>
{payload}
</OAI-PMH>
"""


def envelope(
    payload: str,
    *,
    response_date: str = "2002-06-01T00:00:00Z",
    request_attrs: str = 'verb="ListRecords" metadataPrefix="oai_dc"',
    base_url: str = "http://upstream.example.org/oai",
) -> bytes:
    return ENVELOPE.format(
        response_date=response_date,
        request_attrs=request_attrs,
        base_url=base_url,
        payload=textwrap.indent(payload.rstrip("\n"), "  "),
    ).encode()


def dc_metadata(title: str, creator: str = "Smith, A.") -> str:
    return textwrap.dedent(f"""\
        <oai_dc:dc xmlns:oai_dc="{OAI_DC_NS}"
                   xmlns:dc="{DC_NS}"
                   xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance"
                   xsi:schemaLocation="{OAI_DC_NS} http://www.openarchives.org/OAI/2.0/oai_dc.xsd">
          <dc:title>{title}</dc:title>
          <dc:creator>{creator}</dc:creator>
        </oai_dc:dc>""")


def record(
    identifier: str,
    datestamp: str = "2002-01-01T01:00:00Z",
    title: str = "Study of things",
    deleted: bool = False,
    abouts: tuple[str, ...] = (),
) -> str:
    if deleted:
        return textwrap.dedent(f"""\
            <record>
              <header status="deleted">
                <identifier>{identifier}</identifier>
                <datestamp>{datestamp}</datestamp>
              </header>
            </record>""")
    about_blocks = "".join(
        "\n  <about>\n" + textwrap.indent(a.rstrip("\n"), "    ") + "\n  </about>"
        for a in abouts
    )
    return textwrap.dedent(f"""\
        <record>
          <header>
            <identifier>{identifier}</identifier>
            <datestamp>{datestamp}</datestamp>
          </header>
          <metadata>
{textwrap.indent(dc_metadata(title), "            ")}
          </metadata>{about_blocks}
        </record>""")


def list_records_body(*records: str, token: str | None = None) -> bytes:
    inner = "\n".join(textwrap.indent(r, "  ") for r in records)
    token_line = (
        f"\n  <resumptionToken>{token}</resumptionToken>" if token is not None else ""
    )
    return envelope(f"<ListRecords>\n{inner}{token_line}\n</ListRecords>")


@pytest.fixture
def clean_list() -> bytes:
    return list_records_body(
        record("oai:alpha.example.org:art/0001", "2002-01-01T01:00:00Z", "First study"),
        record("oai:alpha.example.org:art/0002", "2002-01-01T02:00:00Z", "Second study"),
        record("oai:alpha.example.org:art/0003", "2002-01-01T03:00:00Z", "Third study"),
    )
