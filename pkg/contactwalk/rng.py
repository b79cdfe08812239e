"""Counter-based random streams.

Every substream is derived from the tuple (master_seed, stream, replica, *extra)
through numpy's SeedSequence, so a replica's randomness never depends on the
order in which replicas are executed or on which other streams were drawn.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Tuple

import numpy as np

SEED_LIMIT = 2**64


class Stream(IntEnum):
    ENV = 0
    INIT = 1
    WALK = 2


@dataclass(frozen=True)
class Substream:
    master_seed: int
    stream: Stream
    replica: int
    extra: Tuple[int, ...] = ()

    @property
    def key(self) -> Tuple[int, ...]:
        return (self.master_seed, int(self.stream), self.replica, *self.extra)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(self.key))))

    def child(self, *extra: int) -> "Substream":
        for value in extra:
            if value < 0:
                raise ValueError(f"Substream keys must be non-negative, got {value}.")
        return Substream(self.master_seed, self.stream, self.replica, self.extra + tuple(int(v) for v in extra))


@dataclass(frozen=True)
class RngStreams:
    master_seed: int

    def __post_init__(self):
        if not isinstance(self.master_seed, int) or isinstance(self.master_seed, bool):
            raise ValueError("Master seed must be an integer.")
        if not 0 <= self.master_seed < SEED_LIMIT:
            raise ValueError(f"Master seed must fit in 64 unsigned bits, got {self.master_seed}.")

    def substream(self, stream: Stream, replica: int) -> Substream:
        if replica < 0:
            raise ValueError(f"Replica index must be non-negative, got {replica}.")
        return Substream(self.master_seed, Stream(stream), int(replica))

    def env(self, replica: int) -> Substream:
        return self.substream(Stream.ENV, replica)

    def init(self, replica: int) -> Substream:
        return self.substream(Stream.INIT, replica)

    def walk(self, replica: int) -> Substream:
        return self.substream(Stream.WALK, replica)
