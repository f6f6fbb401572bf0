"""Deterministic record corpora for simulated data providers.

Every record is a small Dublin Core document fully determined by
(repository id, index, seed), so byte-level expectations can be computed
ahead of time. Titles all start with the word "Study", which gives fault
injection a stable byte marker to corrupt. A parallel structural format
("sim_struct") exercises multi-format harvesting.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from oairelay.protocol.datestamp import Datestamp
from oairelay.protocol.model import KNOWN_FORMAT_NAMESPACES, MetadataFormat

OAI_DC_NS = "http://www.openarchives.org/OAI/2.0/oai_dc/"
OAI_DC_SCHEMA = "http://www.openarchives.org/OAI/2.0/oai_dc.xsd"
DC_NS = "http://purl.org/dc/elements/1.1/"
SIM_STRUCT_NS = "http://relay.example.org/sim_struct/"
SIM_STRUCT_SCHEMA = "http://relay.example.org/sim_struct.xsd"

KNOWN_FORMAT_NAMESPACES.setdefault("sim_struct", SIM_STRUCT_NS)

FORMATS = {
    "oai_dc": MetadataFormat("oai_dc", OAI_DC_SCHEMA, OAI_DC_NS),
    "sim_struct": MetadataFormat("sim_struct", SIM_STRUCT_SCHEMA, SIM_STRUCT_NS),
}

EPOCH = datetime(2002, 1, 1, tzinfo=timezone.utc)
SPACING = timedelta(hours=1)

_CREATORS = ["Smith, A.", "Jones, B.", "Garcia, C.", "Chen, D.", "Okafor, E.", "Novak, F."]
_SUBJECTS = ["physics", "biology", "computing", "history", "linguistics", "geology"]


@dataclass
class CorpusRecord:
    index: int
    identifier: str
    datestamp: Datestamp
    title: str
    creator: str
    subject: str
    version: int = 1
    deleted: bool = False


@dataclass
class Corpus:
    repository_id: str
    records: dict[str, CorpusRecord] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def ordered(self) -> list[CorpusRecord]:
        return sorted(self.records.values(), key=lambda r: r.identifier)

    def by_index(self, index: int) -> CorpusRecord:
        return self.records[identifier_for(self.repository_id, index)]

    def mutate(self, identifier: str, now: Datestamp) -> CorpusRecord:
        """Bump a record's revision; its datestamp becomes `now`."""
        record = self.records[identifier]
        record.version += 1
        record.title = _title(record.index, self.repository_id, record.version)
        record.datestamp = now
        record.deleted = False
        return record

    def delete(self, identifier: str, now: Datestamp) -> CorpusRecord:
        record = self.records[identifier]
        record.deleted = True
        record.datestamp = now
        return record


def identifier_for(repository_id: str, index: int) -> str:
    return f"oai:{repository_id}.example.org:art/{index:04d}"


def _title(index: int, repository_id: str, version: int) -> str:
    base = f"Study {index:04d} from {repository_id}"
    return base if version == 1 else f"{base} rev {version}"


def build_corpus(repository_id: str, record_count: int, seed: int = 0) -> Corpus:
    corpus = Corpus(repository_id)
    for i in range(record_count):
        rng = random.Random(f"{seed}:{repository_id}:{i}")
        identifier = identifier_for(repository_id, i)
        corpus.records[identifier] = CorpusRecord(
            index=i,
            identifier=identifier,
            datestamp=Datestamp(EPOCH + i * SPACING),
            title=_title(i, repository_id, 1),
            creator=rng.choice(_CREATORS),
            subject=rng.choice(_SUBJECTS),
        )
    return corpus


def oai_dc_fragment(record: CorpusRecord) -> bytes:
    return (
        f'<oai_dc:dc xmlns:oai_dc="{OAI_DC_NS}"\n'
        f'           xmlns:dc="{DC_NS}"\n'
        f'           xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance"\n'
        f'           xsi:schemaLocation="{OAI_DC_NS} {OAI_DC_SCHEMA}">\n'
        f"  <dc:title>{record.title}</dc:title>\n"
        f"  <dc:creator>{record.creator}</dc:creator>\n"
        f"  <dc:subject>{record.subject}</dc:subject>\n"
        f"  <dc:identifier>{record.identifier}</dc:identifier>\n"
        f"</oai_dc:dc>"
    ).encode()


def sim_struct_fragment(record: CorpusRecord) -> bytes:
    return (
        f'<ss:entry xmlns:ss="{SIM_STRUCT_NS}"\n'
        f'          xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance"\n'
        f'          xsi:schemaLocation="{SIM_STRUCT_NS} {SIM_STRUCT_SCHEMA}">\n'
        f"  <ss:code>art-{record.index:04d}</ss:code>\n"
        f"  <ss:label>{record.title}</ss:label>\n"
        f"  <ss:revision>{record.version}</ss:revision>\n"
        f"</ss:entry>"
    ).encode()


def fragment_for(record: CorpusRecord, metadata_prefix: str) -> bytes:
    if metadata_prefix == "oai_dc":
        return oai_dc_fragment(record)
    if metadata_prefix == "sim_struct":
        return sim_struct_fragment(record)
    raise KeyError(metadata_prefix)
