"""Deterministic RNG plumbing.

Every random draw in the package comes from a PCG64 generator seeded through
an explicit SeedSequence; OS entropy is never consulted. Sub-streams are
derived from (seed, *keys) so independent pipeline stages cannot collide, and
per-row streams are keyed to the row's content hash, which makes batched
operations permutation-equivariant.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_to_int(key: int | str) -> int:
    if isinstance(key, int):
        return key & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2s(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seed_sequence(seed: int, *keys: int | str) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF] + [_key_to_int(k) for k in keys])


def spawn_rng(seed: int, *keys: int | str) -> np.random.Generator:
    """A PCG64 generator on the sub-stream identified by (seed, *keys)."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))


def content_hash(row: np.ndarray) -> int:
    """64-bit hash of a float32 row's bytes; keys per-row projection streams."""
    buf = np.ascontiguousarray(row, dtype="<f4").tobytes()
    digest = hashlib.blake2s(buf, digest_size=8).digest()
    return int.from_bytes(digest, "little")
