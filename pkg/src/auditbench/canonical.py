"""Canonical document serialization and content digests.

Every entity that crosses a wire or lands in a store serializes through this
module: sorted keys, no whitespace, UTF-8, no NaN/Infinity. Identical
documents therefore always produce identical bytes, which is what makes
report digests, bundle round trips, and re-exports byte-stable.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any


def canonical_json_bytes(doc: Any) -> bytes:
    """Serialize ``doc`` to canonical JSON bytes.

    Only JSON-native types are accepted; anything else must be converted by
    the caller's ``to_doc`` first.
    """
    return json.dumps(
        doc,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    ).encode("utf-8")


def parse_canonical(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_doc(doc: Any) -> str:
    """SHA-256 hex digest of the canonical serialization of ``doc``."""
    return sha256_hex(canonical_json_bytes(doc))


def format_timestamp(value: datetime) -> str:
    """RFC 3339 UTC timestamp with a ``Z`` suffix.

    Naive datetimes are rejected: ambient local time must never leak into
    canonical documents.
    """
    if value.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware")
    utc = value.astimezone(timezone.utc)
    text = utc.isoformat()
    return text.replace("+00:00", "Z")


def parse_timestamp(text: str) -> datetime:
    normalized = text.replace("Z", "+00:00")
    value = datetime.fromisoformat(normalized)
    if value.tzinfo is None:
        raise ValueError(f"timestamp is not timezone-aware: {text!r}")
    return value.astimezone(timezone.utc)


def format_fraction(value: Fraction | None) -> str | None:
    """Exact wire form for coverage fractions: ``"12/26"``, or None."""
    if value is None:
        return None
    return f"{value.numerator}/{value.denominator}"


def parse_fraction(text: str | None) -> Fraction | None:
    if text is None:
        return None
    numerator, _, denominator = text.partition("/")
    return Fraction(int(numerator), int(denominator))


def new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"
