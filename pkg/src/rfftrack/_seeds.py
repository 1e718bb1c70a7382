from __future__ import annotations

import hashlib

_MASK = (1 << 63) - 1


def derive_seed(seed: int, *parts: object) -> int:
    """Mix ``seed`` with a stable hash of ``parts`` (seed XOR blake2b(parts)).

    Python's ``hash`` is salted per process, so a content hash is used to keep
    derivations identical across runs.
    """
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x1f")
    return (int(seed) ^ int.from_bytes(h.digest(), "little")) & _MASK
