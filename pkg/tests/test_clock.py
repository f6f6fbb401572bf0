"""Clock sources: the simulated clock only moves when told to."""

from datetime import datetime, timezone

from oairelay.clock import SimClock, SystemClock


class TestSimClock:
    def test_starts_at_given_instant(self):
        clock = SimClock(datetime(2002, 6, 1, tzinfo=timezone.utc))
        assert clock.now() == datetime(2002, 6, 1, tzinfo=timezone.utc)

    def test_time_is_frozen_between_steps(self):
        clock = SimClock(datetime(2002, 6, 1, tzinfo=timezone.utc))
        assert clock.now() == clock.now()

    def test_advance_moves_forward(self):
        clock = SimClock(datetime(2002, 6, 1, tzinfo=timezone.utc))
        clock.advance(3600)
        assert clock.now() == datetime(2002, 6, 1, 1, tzinfo=timezone.utc)

    def test_set_to_jumps(self):
        clock = SimClock(datetime(2002, 6, 1, tzinfo=timezone.utc))
        target = datetime(2002, 7, 4, 12, 0, tzinfo=timezone.utc)
        clock.set_to(target)
        assert clock.now() == target

    def test_monotonic_tracks_advances(self):
        clock = SimClock(datetime(2002, 6, 1, tzinfo=timezone.utc))
        before = clock.monotonic()
        clock.advance(10)
        assert clock.monotonic() - before == 10


class TestSystemClock:
    def test_now_is_utc_whole_seconds(self):
        now = SystemClock().now()
        assert now.tzinfo == timezone.utc
        assert now.microsecond == 0

    def test_monotonic_does_not_go_backwards(self):
        clock = SystemClock()
        assert clock.monotonic() <= clock.monotonic()
