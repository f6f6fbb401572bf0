"""Escaping bare ampersands and stray '<' in character data.

Oracle: after repair the body must parse strictly, and the decoded text
content must read exactly like the damaged text did — '&' stays '&', '<'
stays '<' — only their escaping changes.
"""

import xml.etree.ElementTree as ET

from oairelay.repair.entities import repair_entities


def text_of(body: bytes) -> str:
    return "".join(ET.fromstring(body).itertext())


class TestBareAmpersand:
    def test_escaped(self):
        out, fixes = repair_entities(b"<a>this & that</a>")
        assert out == b"<a>this &amp; that</a>"
        assert [f.offset for f in fixes] == [8]
        assert text_of(out) == "this & that"

    def test_multiple(self):
        out, fixes = repair_entities(b"<a>a & b & c</a>")
        assert out == b"<a>a &amp; b &amp; c</a>"
        assert len(fixes) == 2

    def test_ampersand_at_text_end(self):
        out, _ = repair_entities(b"<a>trailing &</a>")
        assert text_of(out) == "trailing &"

    def test_lookalike_without_semicolon(self):
        out, _ = repair_entities(b"<a>AT&T nope</a>")
        assert text_of(out) == "AT&T nope"


class TestLegitimateReferences:
    def test_predefined_entities_kept(self):
        data = b"<a>&amp; &lt; &gt; &quot; &apos;</a>"
        out, fixes = repair_entities(data)
        assert out == data
        assert fixes == []

    def test_numeric_references_kept(self):
        data = b"<a>&#65; &#x41; &#xe9;</a>"
        out, fixes = repair_entities(data)
        assert out == data
        assert fixes == []

    def test_named_entity_not_in_xml_is_escaped(self):
        # HTML-only names are undefined in plain XML, so the '&' is data
        out, _ = repair_entities(b"<a>&nbsp;</a>")
        assert out == b"<a>&amp;nbsp;</a>"
        assert text_of(out) == "&nbsp;"


class TestBareLessThan:
    def test_less_than_before_space(self):
        out, _ = repair_entities(b"<a>1 < 2</a>")
        assert out == b"<a>1 &lt; 2</a>"
        assert text_of(out) == "1 < 2"

    def test_less_than_before_digit(self):
        out, _ = repair_entities(b"<a>x<3</a>")
        assert out == b"<a>x&lt;3</a>"

    def test_real_child_tag_untouched(self):
        data = b"<a>before<b>in</b>after</a>"
        out, fixes = repair_entities(data)
        assert out == data
        assert fixes == []


class TestScopes:
    def test_cdata_untouched(self):
        data = b"<a><![CDATA[this & that < other]]></a>"
        out, fixes = repair_entities(data)
        assert out == data
        assert fixes == []

    def test_comment_untouched(self):
        data = b"<a><!-- & < inside comment --></a>"
        out, fixes = repair_entities(data)
        assert out == data
        assert fixes == []

    def test_attribute_values_untouched(self):
        data = b'<a href="?x=1&y=2">t</a>'
        out, fixes = repair_entities(data)
        assert out == data
        assert fixes == []

    def test_mixed_damage_in_one_body(self):
        out, fixes = repair_entities(b"<a>M & S < plc &amp; co</a>")
        assert out == b"<a>M &amp; S &lt; plc &amp; co</a>"
        assert len(fixes) == 2
        assert text_of(out) == "M & S < plc & co"


def test_offsets_refer_to_input_bytes():
    data = b"<a>x & y < z</a>"
    _, fixes = repair_entities(data)
    for fix in fixes:
        assert data[fix.offset : fix.offset + 1] == fix.original
