"""
Deterministic random streams.

A stream is an immutable descriptor; generators are built from it on demand,
so equal descriptors always reproduce the same draws.
"""
from typing import Tuple, Union

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

UINT64_MAX = 2 ** 64 - 1


class RngStream(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(ge=0, le=UINT64_MAX)
    stream_id: int = Field(default=0, ge=0, le=UINT64_MAX)
    path: Tuple[int, ...] = ()

    def child(self, *keys: int) -> "RngStream":
        """Derive an independent sub-stream keyed by ``keys``"""
        return RngStream(seed=self.seed, stream_id=self.stream_id, path=self.path + tuple(int(k) for k in keys))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self.path))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))


RandomSource = Union[RngStream, np.random.Generator]


def as_generator(rng: RandomSource) -> np.random.Generator:
    """Fresh generator for a stream descriptor; live generators pass through and keep their state"""
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def geometric_offset(u: float, delta: float) -> int:
    """
    Inverse-CDF draw of J >= 0 with P[J >= j] = delta ** j from one uniform u in [0, 1).
    """
    if delta <= 0.0:
        return 0
    return int(math.floor(math.log1p(-u) / math.log(delta)))


def geometric_offsets(u: np.ndarray, delta: float) -> np.ndarray:
    """Vectorized :func:`geometric_offset`"""
    if delta <= 0.0:
        return np.zeros(u.shape, dtype=np.int64)
    return np.floor(np.log1p(-u) / np.log(delta)).astype(np.int64)
