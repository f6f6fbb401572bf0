"""Resolving two records that share a key but came from different sources.

The policy is an ordered rule list; the first rule with an opinion decides.
An indecisive chain falls through to the fallback. The resolver is a pure
function of its inputs so replaying harvests in any order converges.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass

from oairelay.aggregator.store import StoredRecord

DUPLICATE_DISCARD = "DuplicateDiscard"
TRUSTED_SOURCE = "TrustedSource"
MOST_RECENT = "MostRecent"
RULES = (DUPLICATE_DISCARD, TRUSTED_SOURCE, MOST_RECENT)

KEEP_EXISTING = "keepExisting"
REPLACE = "replace"
KEEP_BOTH = "keepBoth"
FALLBACKS = (KEEP_EXISTING, KEEP_BOTH)


@dataclass(frozen=True)
class CollisionPolicy:
    rules: tuple[str, ...] = (DUPLICATE_DISCARD, TRUSTED_SOURCE, MOST_RECENT)
    fallback: str = KEEP_EXISTING

    def __post_init__(self):
        unknown = [r for r in self.rules if r not in RULES]
        if unknown:
            raise ValueError(f"unknown collision rules: {unknown}")
        if len(set(self.rules)) != len(self.rules):
            raise ValueError("collision rules must not repeat")
        if self.fallback not in FALLBACKS:
            raise ValueError(f"unknown fallback {self.fallback!r}")

    @classmethod
    def from_config(cls, raw: dict | None) -> "CollisionPolicy":
        if not raw:
            return cls()
        return cls(tuple(raw.get("rules", RULES)), raw.get("fallback", KEEP_EXISTING))

    def to_dict(self) -> dict:
        return {"rules": list(self.rules), "fallback": self.fallback}


def canonical_metadata(metadata: bytes) -> bytes:
    """Whitespace- and attribute-order-normalized form for equality checks."""
    try:
        root = ET.fromstring(metadata)
    except ET.ParseError:
        return metadata
    parts: list[str] = []
    _canonical(root, parts)
    return "".join(parts).encode()


def _canonical(el: ET.Element, parts: list[str]) -> None:
    parts.append(f"<{el.tag}")
    for name in sorted(el.attrib):
        parts.append(f" {name}={el.attrib[name]!r}")
    parts.append(">")
    text = (el.text or "").strip()
    if text:
        parts.append(text)
    for child in el:
        _canonical(child, parts)
        tail = (child.tail or "").strip()
        if tail:
            parts.append(tail)
    parts.append(f"</{el.tag}>")


def resolve_collision(
    existing: StoredRecord,
    incoming: StoredRecord,
    policy: CollisionPolicy,
    trust_ranks: dict[str, int],
) -> str:
    """One of keepExisting / replace / keepBoth for two same-key records."""
    for rule in policy.rules:
        if rule == DUPLICATE_DISCARD:
            if canonical_metadata(existing.metadata) == canonical_metadata(
                incoming.metadata
            ):
                return KEEP_EXISTING
        elif rule == TRUSTED_SOURCE:
            existing_rank = trust_ranks.get(existing.source_id)
            incoming_rank = trust_ranks.get(incoming.source_id)
            if existing_rank is not None and incoming_rank is not None:
                if incoming_rank < existing_rank:
                    return REPLACE
                if incoming_rank > existing_rank:
                    return KEEP_EXISTING
        elif rule == MOST_RECENT:
            existing_origin, _ = existing.origin_datestamp()
            incoming_origin, _ = incoming.origin_datestamp()
            order = incoming_origin.cmp(existing_origin)
            if order > 0:
                return REPLACE
            if order < 0:
                return KEEP_EXISTING
    return policy.fallback


def trust_winner(
    entries: dict[str, StoredRecord], trust_ranks: dict[str, int]
) -> StoredRecord:
    """The entry served when one key holds records from several sources.

    Lowest trust rank wins; unranked sources sort last, ties break on
    source id so the choice is deterministic.
    """
    return min(
        entries.values(),
        key=lambda r: (trust_ranks.get(r.source_id, 1 << 30), r.source_id),
    )
