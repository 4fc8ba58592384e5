"""Canonical, length-prefixed byte encoding of simulator values.

One encoding serves three purposes: transaction payload sizes (and hence
intrinsic gas), the input of ``hash(...)`` inside contracts, and state
digests for checkpoints.  Every value carries a one-byte type tag.
"""

from __future__ import annotations

import struct

UINT_MAX = 2**256 - 1


def encode(value) -> bytes:
    out = bytearray()
    _enc(value, out)
    return bytes(out)


def _enc(v, out: bytearray) -> None:
    if v is None:
        out += b"n"
    elif isinstance(v, bool):
        out += b"b\x01" if v else b"b\x00"
    elif isinstance(v, int):
        if not 0 <= v <= UINT_MAX:
            raise ValueError(f"integer {v} outside uint256")
        out += b"u" + v.to_bytes(32, "big")
    elif isinstance(v, str):
        raw = v.encode("utf-8")
        out += b"a" + struct.pack(">H", len(raw)) + raw
    elif isinstance(v, (list, tuple)):
        out += b"l" + struct.pack(">I", len(v))
        for item in v:
            _enc(item, out)
    elif isinstance(v, dict):
        items = sorted(v.items(), key=lambda kv: encode(kv[0]))
        out += b"d" + struct.pack(">I", len(items))
        for k, item in items:
            _enc(k, out)
            _enc(item, out)
    else:
        raise TypeError(f"cannot encode {type(v).__name__}")


def payload_size(entry: str, args) -> int:
    """Byte length of a transaction's encoded call (entry name + arguments)."""
    return len(encode([entry, list(args)]))


def word_count(value) -> int:
    """Number of 32-byte storage words needed to hold ``value``."""
    if isinstance(value, (list, tuple)):
        return sum(word_count(v) for v in value)
    if isinstance(value, dict):
        return sum(word_count(k) + word_count(v) for k, v in value.items())
    if isinstance(value, str):
        return max(1, -(-len(value.encode("utf-8")) // 32))
    return 1
