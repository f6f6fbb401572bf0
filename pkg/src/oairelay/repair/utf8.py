"""Strict UTF-8 validation with replacement-character substitution.

Invalid input is repaired by the maximal-subpart rule: the longest valid
prefix of a multi-byte sequence is consumed together and replaced by a single
U+FFFD, so a truncated sequence costs one replacement, not one per byte.
Valid input passes through byte-identically.
"""

from __future__ import annotations

from oairelay.repair.report import Fix

REPLACEMENT = "\N{REPLACEMENT CHARACTER}".encode("utf-8")  # EF BF BD


def _sequence_length(lead: int) -> int:
    if lead < 0x80:
        return 1
    if 0xC2 <= lead <= 0xDF:
        return 2
    if 0xE0 <= lead <= 0xEF:
        return 3
    if 0xF0 <= lead <= 0xF4:
        return 4
    return 0  # invalid lead byte (incl. C0/C1 overlongs and F5..FF)


def _continuation_range(lead: int, position: int) -> tuple[int, int]:
    """Legal range for the continuation byte at `position` (1-based) after `lead`."""
    if position == 1:
        if lead == 0xE0:
            return 0xA0, 0xBF
        if lead == 0xED:
            return 0x80, 0x9F
        if lead == 0xF0:
            return 0x90, 0xBF
        if lead == 0xF4:
            return 0x80, 0x8F
    return 0x80, 0xBF


def repair_utf8(body: bytes) -> tuple[bytes, list[Fix]]:
    """Replace each invalid byte sequence with U+FFFD; log offsets of every fix."""
    try:
        body.decode("utf-8")
        return body, []
    except UnicodeDecodeError:
        pass

    out = bytearray()
    fixes: list[Fix] = []
    n = len(body)
    i = 0
    run_start = 0  # start of the current run of valid bytes

    def flush(upto: int) -> None:
        out.extend(body[run_start:upto])

    while i < n:
        lead = body[i]
        length = _sequence_length(lead)
        if length == 1:
            i += 1
            continue
        if length == 0:
            flush(i)
            fixes.append(Fix(i, body[i : i + 1], REPLACEMENT))
            out.extend(REPLACEMENT)
            i += 1
            run_start = i
            continue
        # multi-byte sequence: verify continuations
        consumed = 1
        while consumed < length:
            pos = i + consumed
            if pos >= n:
                break
            low, high = _continuation_range(lead, consumed)
            if not (low <= body[pos] <= high):
                break
            consumed += 1
        if consumed == length:
            i += length
            continue
        flush(i)
        fixes.append(Fix(i, body[i : i + consumed], REPLACEMENT))
        out.extend(REPLACEMENT)
        i += consumed
        run_start = i

    flush(n)
    return bytes(out), fixes
