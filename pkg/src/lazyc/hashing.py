"""Pluggable deterministic 256-bit hashes.

Contracts call ``hash(e)``; the wrapper digests state for checkpoints.
Both go through a hasher: a callable from bytes to a uint256.
"""

from __future__ import annotations

import hashlib
from typing import Callable

from lazyc.encoding import encode

Hasher = Callable[[bytes], int]


def _hashlib_hasher(name: str) -> Hasher:
    def h(data: bytes) -> int:
        return int.from_bytes(hashlib.new(name, data).digest()[:32], "big")

    h.__name__ = name
    return h


HASHERS: dict[str, Hasher] = {
    "sha3_256": _hashlib_hasher("sha3_256"),
    "sha256": _hashlib_hasher("sha256"),
    "blake2b": _hashlib_hasher("blake2b"),
}
DEFAULT_HASHER = "sha3_256"


def get_hasher(name: str = DEFAULT_HASHER) -> Hasher:
    try:
        return HASHERS[name]
    except KeyError:
        raise ValueError(f"unknown hasher {name!r}; known: {sorted(HASHERS)}") from None


def register_hasher(name: str, fn: Hasher) -> None:
    HASHERS[name] = fn


def hash_value(value, hasher: Hasher | None = None) -> int:
    return (hasher or HASHERS[DEFAULT_HASHER])(encode(value))


def canonical_balances(b: dict) -> dict:
    return {k: v for k, v in b.items() if v}


def canonical_storage(storage: dict) -> dict:
    """``{contract: {var: value}}`` with zero map entries dropped."""
    out = {}
    for cname, svars in storage.items():
        cs = {}
        for var, val in svars.items():
            cs[var] = {k: v for k, v in val.items() if v} if isinstance(val, dict) else val
        out[cname] = cs
    return out


def state_digest(storage: dict, balances: dict, hasher: Hasher | None = None) -> int:
    """Digest of a wrapper state (contract storage plus virtual balances)."""
    return hash_value({"storage": canonical_storage(storage), "b": canonical_balances(balances)},
                      hasher)
