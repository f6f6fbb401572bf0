"""Byte-level response repair: invalid UTF-8, bare markup characters, quoting.

The full per-response orchestration (including record dropping) lives in
:mod:`oairelay.repair.pipeline`; it is not imported here because it depends
on the response parser, which in turn uses the byte stages below.
"""

from oairelay.repair.entities import repair_entities
from oairelay.repair.markup import repair_markup
from oairelay.repair.report import Fix, RepairReport
from oairelay.repair.utf8 import repair_utf8

__all__ = ["repair_utf8", "repair_entities", "repair_markup", "Fix", "RepairReport"]
