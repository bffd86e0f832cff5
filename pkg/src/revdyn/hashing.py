"""Signed feature hashing of sparse rating vectors.

Rating history vectors are indexed by counterpart entity and are as wide as
the number of items (for users) or users (for items).  To keep the event
embedding input a fixed small size we fold them into ``dim`` buckets with a
signed hash: each index is assigned a bucket and a sign in {-1, +1}, both
derived from a keyed blake2b digest, so the reduction is an unbiased
inner-product-preserving random projection and is reproducible across
processes for a fixed seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass
class HashedRatingVector:
    dim: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.dim,):
            raise ValueError(f"values shape {self.values.shape} != ({self.dim},)")


def _digest(seed: int, index: int) -> bytes:
    key = str(seed).encode("utf-8")
    return hashlib.blake2b(str(index).encode("utf-8"), key=key, digest_size=9).digest()


def bucket_and_sign(index: int, dim: int, seed: int) -> tuple[int, float]:
    """Bucket in [0, dim) and sign in {-1.0, +1.0} for one sparse index."""
    d = _digest(seed, index)
    bucket = int.from_bytes(d[:8], "little") % dim
    sign = 1.0 if d[8] & 1 else -1.0
    return bucket, sign


def hash_ratings(entries: Iterable[tuple[int, float]], dim: int, seed: int) -> HashedRatingVector:
    """Fold sparse (index, rating) pairs into a dense signed-hash vector.

    Entries landing in the same bucket are summed with their signs, so the
    expected inner product between two hashed vectors equals the exact sparse
    inner product.  Deterministic for a fixed seed.
    """
    if dim <= 0:
        raise ValueError(f"hash dimension must be >= 1, got {dim}")
    out = np.zeros(dim, dtype=np.float64)
    for index, value in entries:
        if index < 0:
            raise ValueError(f"negative sparse index {index}")
        bucket, sign = bucket_and_sign(index, dim, seed)
        out[bucket] += sign * value
    return HashedRatingVector(dim=dim, values=out)


def hash_single(index: int, value: float, dim: int, seed: int) -> np.ndarray:
    """Dense hash of a one-entry sparse vector (the per-event rating vector)."""
    out = np.zeros(dim, dtype=np.float64)
    bucket, sign = bucket_and_sign(index, dim, seed)
    out[bucket] = sign * value
    return out


def hash_matrix(indices: Sequence[int], values: Sequence[float], dim: int, seed: int) -> np.ndarray:
    """Row-stack of single-entry hashed vectors; one row per event."""
    out = np.zeros((len(indices), dim), dtype=np.float64)
    for row, (index, value) in enumerate(zip(indices, values)):
        bucket, sign = bucket_and_sign(index, dim, seed)
        out[row, bucket] = sign * value
    return out
