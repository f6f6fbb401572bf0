"""Opaque resumption-token codec (base64url JSON, stateless)."""

from __future__ import annotations

import base64
import binascii
import json


class TokenError(Exception):
    """The token is not one of ours, or its payload is unusable."""


def encode_token(payload: dict) -> str:
    raw = json.dumps(payload, separators=(",", ":"), sort_keys=True).encode()
    return base64.urlsafe_b64encode(raw).decode().rstrip("=")


def decode_token(token: str) -> dict:
    pad = "=" * (-len(token) % 4)
    try:
        raw = base64.urlsafe_b64decode(token + pad)
        payload = json.loads(raw)
    except (binascii.Error, ValueError, UnicodeDecodeError) as exc:
        raise TokenError(f"undecodable resumption token: {exc}") from exc
    if not isinstance(payload, dict):
        raise TokenError("resumption token payload is not an object")
    return payload
