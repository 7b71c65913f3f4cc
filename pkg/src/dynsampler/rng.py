"""Seeded random streams with labelled substreams.

Each stream is a Mersenne Twister (:class:`random.Random`) seeded with a
64-bit integer. ``split(label, index)`` derives a child seed by hashing the
parent seed together with the label path using BLAKE2b, so substreams are
reproducible and independent of the order in which they are created.
"""
from __future__ import annotations

import hashlib
import random


def derive_seed(seed: int, *path) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(8, "little", signed=False))
    for part in path:
        h.update(b"\x1f")
        h.update(repr(part).encode())
    return int.from_bytes(h.digest(), "little")


class RngStream:
    __slots__ = ("seed", "path", "_gen", "random")

    def __init__(self, seed: int, path: tuple = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)
        self.path = tuple(path)
        self._gen = random.Random(derive_seed(self.seed, *self.path) if self.path else self.seed)
        self.random = self._gen.random

    def split(self, label, index=None) -> "RngStream":
        part = label if index is None else (label, index)
        return RngStream(self.seed, self.path + (part,))

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def randrange(self, n: int) -> int:
        return self._gen.randrange(n)

    def shuffle(self, items: list) -> None:
        self._gen.shuffle(items)

    def sample(self, population, k: int) -> list:
        return self._gen.sample(population, k)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path!r})"
