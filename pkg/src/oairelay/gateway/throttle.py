"""Per-client token buckets.

Each client address gets a bucket holding up to ``capacity`` tokens that
refills continuously at ``refill_per_second``. A request spends one token;
an empty bucket rejects with the number of seconds until the next token
exists. Buckets are created full, so a new client can burst up to the
capacity before the rate limit bites.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

from oairelay.clock import Clock, SystemClock


@dataclass(frozen=True)
class Admission:
    admitted: bool
    #: whole seconds a rejected client should wait before retrying
    retry_after: int = 0


class _Bucket:
    __slots__ = ("tokens", "last_refill")

    def __init__(self, tokens: float, now: float):
        self.tokens = tokens
        self.last_refill = now


class ThrottleMap:
    def __init__(
        self,
        capacity: int,
        refill_per_second: float,
        clock: Clock | None = None,
    ):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        if refill_per_second <= 0:
            raise ValueError("refill rate must be positive")
        self.capacity = capacity
        self.refill_per_second = refill_per_second
        self.clock = clock or SystemClock()
        self._buckets: dict[str, _Bucket] = {}
        self._lock = threading.Lock()

    def check(self, client: str) -> Admission:
        """Spend one token for this client, or say how long until one exists."""
        now = self.clock.monotonic()
        with self._lock:
            bucket = self._buckets.get(client)
            if bucket is None:
                bucket = _Bucket(float(self.capacity), now)
                self._buckets[client] = bucket
            else:
                elapsed = max(0.0, now - bucket.last_refill)
                bucket.tokens = min(
                    float(self.capacity),
                    bucket.tokens + elapsed * self.refill_per_second,
                )
                bucket.last_refill = now
            if bucket.tokens >= 1.0:
                bucket.tokens -= 1.0
                return Admission(True)
            wait = (1.0 - bucket.tokens) / self.refill_per_second
            return Admission(False, retry_after=max(1, math.ceil(wait)))

    def tokens_left(self, client: str) -> float:
        """Current balance without spending; mainly for inspection."""
        now = self.clock.monotonic()
        with self._lock:
            bucket = self._buckets.get(client)
            if bucket is None:
                return float(self.capacity)
            elapsed = max(0.0, now - bucket.last_refill)
            return min(
                float(self.capacity),
                bucket.tokens + elapsed * self.refill_per_second,
            )
