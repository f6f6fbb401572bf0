"""Datestamps with day or second granularity and truncating comparison."""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum


class Granularity(Enum):
    DAY = "YYYY-MM-DD"
    SECOND = "YYYY-MM-DDThh:mm:ssZ"


_DAY_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_SECOND_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})Z$")


@dataclass(frozen=True)
class Datestamp:
    """A UTC instant plus the granularity it was expressed at.

    Comparisons between mixed granularities truncate the finer operand to the
    coarser one, so `2002-06-01` equals any second within that day.
    """

    instant: datetime
    granularity: Granularity = Granularity.SECOND

    def __post_init__(self):
        inst = self.instant
        if inst.tzinfo is None:
            inst = inst.replace(tzinfo=timezone.utc)
        else:
            inst = inst.astimezone(timezone.utc)
        inst = inst.replace(microsecond=0)
        if self.granularity is Granularity.DAY:
            inst = inst.replace(hour=0, minute=0, second=0)
        object.__setattr__(self, "instant", inst)

    @classmethod
    def parse(cls, text: str) -> "Datestamp":
        m = _DAY_RE.match(text)
        if m:
            y, mo, d = (int(g) for g in m.groups())
            return cls(datetime(y, mo, d, tzinfo=timezone.utc), Granularity.DAY)
        m = _SECOND_RE.match(text)
        if m:
            y, mo, d, h, mi, s = (int(g) for g in m.groups())
            return cls(datetime(y, mo, d, h, mi, s, tzinfo=timezone.utc), Granularity.SECOND)
        raise ValueError(f"not an OAI-PMH datestamp: {text!r}")

    @classmethod
    def from_datetime(cls, dt: datetime, granularity: Granularity = Granularity.SECOND) -> "Datestamp":
        return cls(dt, granularity)

    def serialize(self) -> str:
        if self.granularity is Granularity.DAY:
            return self.instant.strftime("%Y-%m-%d")
        return self.instant.strftime("%Y-%m-%dT%H:%M:%SZ")

    def truncated(self, granularity: Granularity) -> "Datestamp":
        if granularity is self.granularity:
            return self
        return Datestamp(self.instant, granularity)

    def cmp(self, other: "Datestamp") -> int:
        """-1, 0 or 1 at the coarser of the two operands' granularities."""
        if self.granularity is Granularity.DAY or other.granularity is Granularity.DAY:
            a = self.truncated(Granularity.DAY).instant
            b = other.truncated(Granularity.DAY).instant
        else:
            a, b = self.instant, other.instant
        return (a > b) - (a < b)

    def __str__(self) -> str:
        return self.serialize()


def in_range(value: Datestamp, low: Datestamp | None, high: Datestamp | None) -> bool:
    """Inclusive range check with truncating comparison on both bounds."""
    if low is not None and value.cmp(low) < 0:
        return False
    if high is not None and value.cmp(high) > 0:
        return False
    return True
