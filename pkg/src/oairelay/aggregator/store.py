"""Durable record store: append-only log plus an in-memory key index.

Layout inside the storage directory:

- ``records.jsonl`` — one JSON object per line, either a ``put`` carrying a
  full record version or a ``drop`` removing one (key, source) entry. The
  index is rebuilt by replaying the log; a torn final line (crash during
  append) is discarded on load.
- ``state.json``   — everything else (source registry, watermarks, the
  store generation), replaced atomically via rename.

A key is (identifier, metadataPrefix). Under the keepBoth fallback several
sources may hold an entry for the same key; each (key, source) pair keeps
only its latest version.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from oairelay.protocol.datestamp import Datestamp
from oairelay.protocol.model import ProvenanceEntry
from oairelay.protocol.provenance import find_provenance

log = logging.getLogger(__name__)

Key = tuple[str, str]


@dataclass(frozen=True)
class StoredRecord:
    identifier: str
    metadata_prefix: str
    source_id: str
    original_datestamp: Datestamp
    local_datestamp: Datestamp
    metadata: bytes = b""
    abouts: tuple[bytes, ...] = ()
    deleted: bool = False

    @property
    def key(self) -> Key:
        return (self.identifier, self.metadata_prefix)

    def provenance(self) -> ProvenanceEntry | None:
        _, entry = find_provenance(self.abouts)
        return entry

    def origin_datestamp(self) -> tuple[Datestamp, bool]:
        """(innermost provenance origin datestamp, had-provenance flag)."""
        entry = self.provenance()
        if entry is None:
            return self.local_datestamp, False
        return entry.innermost().origin_datestamp, True

    def to_dict(self) -> dict:
        return {
            "identifier": self.identifier,
            "metadataPrefix": self.metadata_prefix,
            "source": self.source_id,
            "originalDatestamp": self.original_datestamp.serialize(),
            "localDatestamp": self.local_datestamp.serialize(),
            "metadata": base64.b64encode(self.metadata).decode(),
            "abouts": [base64.b64encode(a).decode() for a in self.abouts],
            "deleted": self.deleted,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "StoredRecord":
        return cls(
            identifier=raw["identifier"],
            metadata_prefix=raw["metadataPrefix"],
            source_id=raw["source"],
            original_datestamp=Datestamp.parse(raw["originalDatestamp"]),
            local_datestamp=Datestamp.parse(raw["localDatestamp"]),
            metadata=base64.b64decode(raw["metadata"]),
            abouts=tuple(base64.b64decode(a) for a in raw["abouts"]),
            deleted=raw["deleted"],
        )


class RecordStore:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._log_path = self.directory / "records.jsonl"
        self._state_path = self.directory / "state.json"
        self._lock = threading.RLock()
        self._index: dict[Key, dict[str, StoredRecord]] = {}
        self._state: dict = {"generation": 0}
        self._load()

    # -- loading -------------------------------------------------------------

    def _load(self) -> None:
        if self._state_path.exists():
            self._state = json.loads(self._state_path.read_text())
        if not self._log_path.exists():
            return
        raw = self._log_path.read_bytes()
        good_until = 0
        for line in raw.splitlines(keepends=True):
            if not line.endswith(b"\n"):
                log.warning("discarding torn trailing line in %s", self._log_path)
                break
            try:
                self._apply(json.loads(line))
            except (ValueError, KeyError) as exc:
                log.warning("discarding undecodable log line: %s", exc)
                break
            good_until += len(line)
        if good_until != len(raw):
            with open(self._log_path, "ab") as fh:
                fh.truncate(good_until)

    def _apply(self, op: dict) -> None:
        if op["op"] == "put":
            record = StoredRecord.from_dict(op["record"])
            self._index.setdefault(record.key, {})[record.source_id] = record
        elif op["op"] == "drop":
            key = (op["identifier"], op["metadataPrefix"])
            entries = self._index.get(key, {})
            entries.pop(op["source"], None)
            if not entries:
                self._index.pop(key, None)
        else:
            raise ValueError(f"unknown log op {op['op']!r}")

    # -- writing -------------------------------------------------------------

    def _append(self, op: dict) -> None:
        with open(self._log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(op, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def put(self, record: StoredRecord) -> None:
        with self._lock:
            self._append({"op": "put", "record": record.to_dict()})
            self._index.setdefault(record.key, {})[record.source_id] = record

    def drop(self, key: Key, source_id: str) -> None:
        with self._lock:
            self._append(
                {
                    "op": "drop",
                    "identifier": key[0],
                    "metadataPrefix": key[1],
                    "source": source_id,
                }
            )
            entries = self._index.get(key, {})
            entries.pop(source_id, None)
            if not entries:
                self._index.pop(key, None)

    # -- reading -------------------------------------------------------------

    def get(self, key: Key) -> dict[str, StoredRecord]:
        with self._lock:
            return dict(self._index.get(key, {}))

    def keys(self) -> list[Key]:
        with self._lock:
            return sorted(self._index)

    def entries(self) -> dict[Key, dict[str, StoredRecord]]:
        with self._lock:
            return {k: dict(v) for k, v in self._index.items()}

    def record_count(self) -> int:
        with self._lock:
            return sum(len(v) for v in self._index.values())

    def key_count(self) -> int:
        with self._lock:
            return len(self._index)

    # -- state ---------------------------------------------------------------

    @property
    def generation(self) -> int:
        with self._lock:
            return self._state.get("generation", 0)

    def bump_generation(self) -> int:
        with self._lock:
            self._state["generation"] = self._state.get("generation", 0) + 1
            self._write_state()
            return self._state["generation"]

    def get_state(self, section: str) -> dict:
        with self._lock:
            return self._state.get(section, {})

    def set_state(self, section: str, value: dict) -> None:
        with self._lock:
            self._state[section] = value
            self._write_state()

    def _write_state(self) -> None:
        tmp = self._state_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self._state, indent=2, sort_keys=True))
        os.replace(tmp, self._state_path)
