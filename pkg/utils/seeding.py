"""
Named random streams derived from one master seed.
"""
import hashlib

import numpy as np

STREAMS = ("env", "train", "attack", "eval")


def _stream_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "little")


class SeedStreams:
    """
    Splits a master seed into independent, reproducible generators.

    `generator("attack", 7)` is the same stream in every process for the
    same master seed, and independent of every other (name, index) pair.
    """

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)

    def sequence(self, name: str, *index: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=(_stream_key(name), *map(int, index)))

    def generator(self, name: str, *index: int) -> np.random.Generator:
        return np.random.default_rng(self.sequence(name, *index))

    def seed(self, name: str, *index: int) -> int:
        """A plain integer seed for APIs that take one (env reset)."""
        return int(self.sequence(name, *index).generate_state(1, dtype=np.uint32)[0])
