"""FNV-1a hashing and the SplitMix64 generator.

Both are fixed, documented algorithms so that every consumer of the
pipeline (mock captions, reference embeddings, merge-size draws, file
digests) gets bit-identical results.

Test vectors::

    fnv1a64(b"")        == 0xcbf29ce484222325
    fnv1a64(b"a")       == 0xaf63dc4c8601ec8c
    fnv1a64(b"foobar")  == 0x85944171f73967e8

    SplitMix64(0) -> 0xe220a8397b1dcdaf, 0x6e789e6aa1b965f4, 0x06c45d188009454f
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def fnv1a64(data: bytes | str) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def digest_hex(data: bytes) -> str:
    return f"{fnv1a64(data):016x}"


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Counter-based 64-bit generator: output n is mix(seed + n * gamma)."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _mix(self.state)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed range [lo, hi], by rejection sampling."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + x % span
