"""Append-only record store: durability, replay, torn tails, generations."""

import json

import pytest

from oairelay.aggregator.store import RecordStore, StoredRecord
from oairelay.protocol.datestamp import Datestamp


def make_record(identifier="oai:alpha.example.org:art/0001", source="alpha",
                stamp="2002-01-01T01:00:00Z", local="2002-06-01T00:00:00Z",
                deleted=False, metadata=b"<x/>"):
    return StoredRecord(
        identifier=identifier,
        metadata_prefix="oai_dc",
        source_id=source,
        original_datestamp=Datestamp.parse(stamp),
        local_datestamp=Datestamp.parse(local),
        metadata=b"" if deleted else metadata,
        deleted=deleted,
    )


class TestPutAndGet:
    def test_put_then_get_round_trips(self, tmp_path):
        store = RecordStore(tmp_path)
        rec = make_record()
        store.put(rec)
        assert store.get(rec.key) == {"alpha": rec}
        assert store.record_count() == 1
        assert store.key_count() == 1

    def test_same_source_overwrites(self, tmp_path):
        store = RecordStore(tmp_path)
        store.put(make_record(metadata=b"<old/>"))
        store.put(make_record(metadata=b"<new/>"))
        (entry,) = store.get(("oai:alpha.example.org:art/0001", "oai_dc")).values()
        assert entry.metadata == b"<new/>"
        assert store.record_count() == 1

    def test_two_sources_coexist_under_one_key(self, tmp_path):
        store = RecordStore(tmp_path)
        store.put(make_record(source="alpha"))
        store.put(make_record(source="beta"))
        assert set(store.get(("oai:alpha.example.org:art/0001", "oai_dc"))) == {
            "alpha",
            "beta",
        }
        assert store.record_count() == 2
        assert store.key_count() == 1

    def test_drop_removes_one_source(self, tmp_path):
        store = RecordStore(tmp_path)
        store.put(make_record(source="alpha"))
        store.put(make_record(source="beta"))
        store.drop(("oai:alpha.example.org:art/0001", "oai_dc"), "alpha")
        assert set(store.get(("oai:alpha.example.org:art/0001", "oai_dc"))) == {"beta"}

    def test_keys_sorted(self, tmp_path):
        store = RecordStore(tmp_path)
        store.put(make_record("oai:alpha.example.org:art/0002"))
        store.put(make_record("oai:alpha.example.org:art/0001"))
        assert store.keys() == [
            ("oai:alpha.example.org:art/0001", "oai_dc"),
            ("oai:alpha.example.org:art/0002", "oai_dc"),
        ]

    def test_deleted_record_round_trips(self, tmp_path):
        store = RecordStore(tmp_path)
        store.put(make_record(deleted=True))
        reopened = RecordStore(tmp_path)
        (entry,) = reopened.get(("oai:alpha.example.org:art/0001", "oai_dc")).values()
        assert entry.deleted
        assert entry.metadata == b""


class TestDurability:
    def test_reopen_replays_log(self, tmp_path):
        store = RecordStore(tmp_path)
        for i in range(5):
            store.put(make_record(f"oai:alpha.example.org:art/{i:04d}"))
        store.drop(("oai:alpha.example.org:art/0003", "oai_dc"), "alpha")
        reopened = RecordStore(tmp_path)
        assert reopened.record_count() == 4
        assert reopened.keys() == store.keys()

    def test_torn_final_line_is_discarded(self, tmp_path):
        store = RecordStore(tmp_path)
        store.put(make_record("oai:alpha.example.org:art/0001"))
        store.put(make_record("oai:alpha.example.org:art/0002"))
        log = next(tmp_path.glob("*.jsonl"))
        raw = log.read_bytes()
        log.write_bytes(raw[: len(raw) - 9])
        reopened = RecordStore(tmp_path)
        assert reopened.record_count() == 1
        assert reopened.keys() == [("oai:alpha.example.org:art/0001", "oai_dc")]

    def test_append_after_torn_tail_keeps_log_readable(self, tmp_path):
        store = RecordStore(tmp_path)
        store.put(make_record("oai:alpha.example.org:art/0001"))
        log = next(tmp_path.glob("*.jsonl"))
        raw = log.read_bytes()
        log.write_bytes(raw + b'{"half":')
        recovered = RecordStore(tmp_path)
        recovered.put(make_record("oai:alpha.example.org:art/0002"))
        final = RecordStore(tmp_path)
        assert final.record_count() == 2

    def test_log_lines_are_json(self, tmp_path):
        store = RecordStore(tmp_path)
        store.put(make_record())
        log = next(tmp_path.glob("*.jsonl"))
        for line in log.read_bytes().splitlines():
            json.loads(line)


class TestGenerationAndState:
    def test_generation_survives_restart(self, tmp_path):
        store = RecordStore(tmp_path)
        assert store.generation == 0
        store.bump_generation()
        store.bump_generation()
        assert RecordStore(tmp_path).generation == 2

    def test_state_sections_survive_restart(self, tmp_path):
        store = RecordStore(tmp_path)
        store.set_state("sources", {"alpha": {"trustRank": 1}})
        assert RecordStore(tmp_path).get_state("sources") == {"alpha": {"trustRank": 1}}

    def test_unknown_state_section_is_empty(self, tmp_path):
        assert RecordStore(tmp_path).get_state("nothing") == {}


class TestOriginDatestamp:
    def test_record_without_provenance_reports_local_stamp(self):
        rec = make_record()
        stamp, had = rec.origin_datestamp()
        assert not had
        assert stamp == rec.local_datestamp

    def test_missing_directory_is_created(self, tmp_path):
        store = RecordStore(tmp_path / "fresh" / "store")
        store.put(make_record())
        assert store.record_count() == 1
