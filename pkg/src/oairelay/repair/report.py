"""Per-response repair ledger."""

from __future__ import annotations

import base64
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Fix:
    """One byte-level replacement: `offset` refers to the stage's input bytes."""

    offset: int
    original: bytes
    replacement: bytes

    def to_dict(self) -> dict:
        return {
            "offset": self.offset,
            "original_b64": base64.b64encode(self.original).decode(),
            "replacement": self.replacement.decode("utf-8", "backslashreplace"),
        }


@dataclass
class RepairReport:
    """What the repair pipeline did to one upstream response."""

    utf8_fixes: list[Fix] = field(default_factory=list)
    entity_fixes: list[Fix] = field(default_factory=list)
    markup_fixes: list[Fix] = field(default_factory=list)
    dropped_records: list[str] = field(default_factory=list)
    residual_violations: list = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not (
            self.utf8_fixes
            or self.entity_fixes
            or self.markup_fixes
            or self.dropped_records
            or self.residual_violations
        )

    def total_fixes(self) -> int:
        return len(self.utf8_fixes) + len(self.entity_fixes) + len(self.markup_fixes)

    def to_dict(self) -> dict:
        return {
            "utf8_fixes": [f.to_dict() for f in self.utf8_fixes],
            "entity_fixes": [f.to_dict() for f in self.entity_fixes],
            "markup_fixes": [f.to_dict() for f in self.markup_fixes],
            "dropped_records": list(self.dropped_records),
            "residual_violations": [
                {
                    "class": v.klass,
                    "offset": v.offset,
                    "message": v.message,
                    "fatal": v.fatal,
                }
                for v in self.residual_violations
            ],
        }
