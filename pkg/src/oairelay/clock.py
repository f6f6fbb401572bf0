"""Clock abstraction so services can run on wall time or a controlled test clock."""

from __future__ import annotations

import threading
import time
from datetime import datetime, timedelta, timezone


class SystemClock:
    """Wall-clock time, UTC."""

    def now(self) -> datetime:
        return datetime.now(timezone.utc).replace(microsecond=0)

    def monotonic(self) -> float:
        return time.monotonic()


class SimClock:
    """Settable clock for deterministic tests and scenarios.

    Time only moves when `advance()` or `set_to()` is called, so everything
    that happens between two steps is stamped with the same instant.
    """

    def __init__(self, start: datetime | None = None):
        if start is None:
            start = datetime(2002, 6, 1, 0, 0, 0, tzinfo=timezone.utc)
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        self._now = start.replace(microsecond=0)
        self._lock = threading.Lock()

    def now(self) -> datetime:
        with self._lock:
            return self._now

    def monotonic(self) -> float:
        with self._lock:
            return self._now.timestamp()

    def advance(self, seconds: float) -> datetime:
        with self._lock:
            self._now = self._now + timedelta(seconds=seconds)
            return self._now

    def set_to(self, instant: datetime) -> datetime:
        if instant.tzinfo is None:
            instant = instant.replace(tzinfo=timezone.utc)
        with self._lock:
            self._now = instant.replace(microsecond=0)
            return self._now


#: Anything with now() -> aware datetime and monotonic() -> float.
Clock = SystemClock | SimClock
