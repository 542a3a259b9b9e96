"""Deterministic pseudo-random draws keyed on structured labels.

Every stochastic choice in the package (expert noise, ensemble perturbation)
is derived by hashing a seed together with a descriptive key, so a draw
depends only on *what* is being decided, never on call order or platform
float RNG state.
"""

import hashlib

_SEP = b"\x1f"


def _encode(parts) -> bytes:
    chunks = []
    for part in parts:
        if isinstance(part, bool):
            chunks.append(b"b:" + (b"1" if part else b"0"))
        elif isinstance(part, int):
            chunks.append(b"i:" + str(part).encode("ascii"))
        elif isinstance(part, float):
            chunks.append(b"f:" + repr(part).encode("ascii"))
        elif isinstance(part, str):
            chunks.append(b"s:" + part.encode("utf-8"))
        else:
            raise TypeError(f"unhashable draw key part: {part!r}")
    return _SEP.join(chunks)


def stable_hash64(*parts) -> int:
    """64-bit integer hash of the given key parts (sha256-based)."""
    digest = hashlib.sha256(_encode(parts)).digest()
    return int.from_bytes(digest[:8], "big")


def unit_draw(*parts) -> float:
    """Uniform draw in [0, 1) determined entirely by the key parts."""
    # 53 bits so the result is an exactly representable double below 1.0.
    return (stable_hash64(*parts) >> 11) / (1 << 53)


def coin(*parts) -> bool:
    """Fair boolean draw determined entirely by the key parts."""
    return stable_hash64(*parts) & 1 == 1
