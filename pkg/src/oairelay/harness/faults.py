"""Deterministic fault injection for simulated providers.

Record faults pick their victim indices with a seeded RNG, so the exact set
of damaged identifiers is computable ahead of serving — tests compare the
repair pipeline's behavior against that enumeration. Response faults strike
by request ordinal (every k-th response), so a retry of a failed request
succeeds, which is what lets harvesters make progress past them.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

from oairelay.xmlscan import ScanError, element_spans

INVALID_UTF8 = "InvalidUtf8"
BARE_AMPERSAND = "BareAmpersand"
BARE_LESS_THAN = "BareLessThan"
UNQUOTED_ATTRIBUTE = "UnquotedAttribute"
WRONG_SCHEMA_URI = "WrongSchemaUri"
MISSING_RESPONSE_DATE = "MissingResponseDate"

RECORD_FAULTS = frozenset(
    {INVALID_UTF8, BARE_AMPERSAND, BARE_LESS_THAN, UNQUOTED_ATTRIBUTE, WRONG_SCHEMA_URI}
)
RESPONSE_FAULTS = frozenset({MISSING_RESPONSE_DATE})

#: Record faults the byte-repair stages can fix in place. WrongSchemaUri is
#: not repairable, so affected records get dropped downstream.
REPAIRABLE_FAULTS = frozenset(
    {INVALID_UTF8, BARE_AMPERSAND, BARE_LESS_THAN, UNQUOTED_ATTRIBUTE}
)

_MARKER = b"Study"
_RESPONSE_DATE_RE = re.compile(rb"[ \t]*<responseDate>[^<]*</responseDate>\r?\n?")

_RECORD_TRANSFORMS = {
    INVALID_UTF8: (_MARKER, b"St\xffdy"),
    BARE_AMPERSAND: (_MARKER, b"Study & review"),
    BARE_LESS_THAN: (_MARKER, b"Study < review"),
    UNQUOTED_ATTRIBUTE: (b"<dc:title>", b"<dc:title lang=en>"),
    WRONG_SCHEMA_URI: (
        b"http://www.openarchives.org/OAI/2.0/oai_dc/",
        b"http://www.openarchives.org/OAI/1.1/oai_dc/",
    ),
}


@dataclass(frozen=True)
class FaultSpec:
    kind: str
    rate: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in RECORD_FAULTS | RESPONSE_FAULTS:
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if not 0 < self.rate <= 1:
            raise ValueError(f"fault rate must be in (0, 1], got {self.rate}")

    # -- record faults -------------------------------------------------------

    def affected_indices(self, repository_id: str, record_count: int) -> list[int]:
        """The corpus indices this fault damages — stable for a given seed."""
        if self.kind not in RECORD_FAULTS:
            return []
        count = round(self.rate * record_count)
        rng = random.Random(f"{self.seed}:{self.kind}:{repository_id}")
        return sorted(rng.sample(range(record_count), count))

    # -- response faults -----------------------------------------------------

    def strikes_response(self, ordinal: int) -> bool:
        """Whether the `ordinal`-th response (1-based) is damaged."""
        if self.kind not in RESPONSE_FAULTS:
            return False
        period = max(1, round(1 / self.rate))
        return ordinal % period == 0


class FaultEngine:
    """Applies a provider's fault specs to serialized response bodies."""

    def __init__(self, specs: tuple[FaultSpec, ...], repository_id: str, record_count: int):
        self.specs = tuple(specs)
        self.repository_id = repository_id
        self._by_index: dict[int, list[str]] = {}
        for spec in self.specs:
            for index in spec.affected_indices(repository_id, record_count):
                self._by_index.setdefault(index, []).append(spec.kind)

    def faults_for_index(self, index: int) -> list[str]:
        return self._by_index.get(index, [])

    def affected_map(self) -> dict[int, list[str]]:
        return {i: list(kinds) for i, kinds in sorted(self._by_index.items())}

    def unrepairable_indices(self) -> set[int]:
        return {
            i
            for i, kinds in self._by_index.items()
            if any(k not in REPAIRABLE_FAULTS for k in kinds)
        }

    def damage_response(
        self, body: bytes, page_indices: list[int], ordinal: int
    ) -> bytes:
        """Damage one serialized response: its records, then the envelope."""
        body = self._damage_records(body, page_indices)
        for spec in self.specs:
            if spec.kind == MISSING_RESPONSE_DATE and spec.strikes_response(ordinal):
                body = _RESPONSE_DATE_RE.sub(b"", body, count=1)
        return body

    def _damage_records(self, body: bytes, page_indices: list[int]) -> bytes:
        if not self._by_index or not page_indices:
            return body
        try:
            spans = element_spans(body, b"record")
        except ScanError:
            return body
        if len(spans) != len(page_indices):
            return body
        # Work back to front so earlier spans keep their offsets.
        for span, index in sorted(
            zip(spans, page_indices), key=lambda p: -p[0].outer_start
        ):
            kinds = self._by_index.get(index)
            if not kinds:
                continue
            chunk = body[span.outer_start : span.outer_end]
            for kind in kinds:
                needle, replacement = _RECORD_TRANSFORMS[kind]
                chunk = chunk.replace(needle, replacement, 1)
            body = body[: span.outer_start] + chunk + body[span.outer_end :]
        return body
