"""Counter-based random streams.

Every replica owns a 64-bit key derived by hashing ``(master_seed, replica)``.
The ``c``-th uniform of a stream is ``splitmix64(key + (c + 1) * GOLDEN)``
mapped to ``[0, 1)`` with 53 bits, so any draw is addressable without
sequential state and the result never depends on how replicas are split
across workers. The numba kernels reimplement the same arithmetic.
"""

from __future__ import annotations

import hashlib

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SALT = np.uint64(0xD1B54A32D192ED03)
INV53 = 1.0 / 9007199254740992.0
MASK64 = (1 << 64) - 1


def mix64(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def replica_keys(master_seed: int, replicas) -> np.ndarray:
    """Stream keys for the given replica indices (int or array of indices)."""
    idx = np.arange(replicas) if np.ndim(replicas) == 0 else np.asarray(replicas)
    base = mix64(np.uint64(int(master_seed) & MASK64) ^ _SALT)
    with np.errstate(over="ignore"):
        return mix64(base + (idx.astype(np.uint64) + np.uint64(1)) * GOLDEN)


def uniforms(keys, counters) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = mix64(keys + (counters + np.uint64(1)) * GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * INV53


def derive_seed(master_seed: int, *labels) -> int:
    """Hash a master seed and arbitrary labels into a fresh 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master_seed) & MASK64).encode())
    for lab in labels:
        h.update(b"\x1f")
        h.update(str(lab).encode())
    return int.from_bytes(h.digest(), "little")


def philox(master_seed: int, *labels) -> np.random.Generator:
    """numpy Generator on a Philox counter stream keyed by ``derive_seed``."""
    return np.random.Generator(np.random.Philox(key=derive_seed(master_seed, *labels)))
