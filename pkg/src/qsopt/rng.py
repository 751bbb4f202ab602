"""Counter-based splittable random streams.

Every stream is a Philox-4x64 generator keyed by the pair
``(seed, stream_id)``.  Child streams get a new ``stream_id`` obtained by
hashing the parent id together with a label, so the whole tree of streams
used by one trial is a pure function of the trial seed.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 finalizer on a Python int."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _part_to_int(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        return int(part) & MASK64
    if isinstance(part, (float, np.floating)):
        return struct.unpack("<Q", struct.pack("<d", float(part)))[0]
    digest = hashlib.blake2b(str(part).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(*parts) -> int:
    """Fold ints, floats and strings into a single 64-bit seed."""
    h = 0x6A09E667F3BCC908
    for part in parts:
        h = splitmix64(h ^ _part_to_int(part))
    return h


class Rng:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    Unknown attributes are forwarded to the underlying
    :class:`numpy.random.Generator`, so ``rng.normal(...)``,
    ``rng.integers(...)`` and friends work directly.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int = 0, stream_id: int = 0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not (0 <= seed <= MASK64 and 0 <= stream_id <= MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = seed
        self.stream_id = stream_id
        key = seed | (stream_id << 64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __getattr__(self, name):
        return getattr(self._gen, name)

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream_id={self.stream_id})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, label) -> "Rng":
        """Independent stream for a named phase or sub-task."""
        return Rng(self.seed, derive_seed(self.stream_id, label))

    def spawn(self, n: int) -> list["Rng"]:
        return [self.child(("spawn", i)) for i in range(n)]

    def seeds(self, n: int) -> np.ndarray:
        """Draw ``n`` uniform 64-bit seeds (the random seed omega of a shared-seed oracle)."""
        return self._gen.integers(0, MASK64, size=n, dtype=np.uint64, endpoint=True)

    def unit_vector(self, dim: int) -> np.ndarray:
        v = self._gen.standard_normal(dim)
        n = np.linalg.norm(v)
        while n == 0.0:
            v = self._gen.standard_normal(dim)
            n = np.linalg.norm(v)
        return v / n
