"""Named random substreams derived from one root seed.

Each consumer (data, noise, init, eval, ...) gets its own generator, so e.g.
changing the evaluation cadence never shifts the training draws.
"""

import zlib

import numpy as np

STREAMS = ("data", "noise", "init", "eval", "reference", "batch")


def substream(seed: int, name: str) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(key,)))


def substreams(seed: int, names=STREAMS) -> dict:
    return {n: substream(seed, n) for n in names}
