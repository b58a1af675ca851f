"""Deterministic RNG substreams for replica farms.

Philox is counter-based, so `substream(seed, k)` is a pure function of
(seed, k): replicas can be computed in any order, on any number of
workers, and still consume identical random sequences.
"""

import numpy as np

__all__ = ["substream", "BatchedDraws"]


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for the substream identified by (master_seed, *path)."""
    ss = np.random.SeedSequence([int(master_seed), *[int(p) for p in path]])
    return np.random.Generator(np.random.Philox(ss))


class BatchedDraws:
    """Sequential uniform/exponential draws pulled from numpy in blocks.

    Consuming one number at a time through numpy costs ~1us of call
    overhead; event loops need millions. Blocks are refilled lazily with
    a fixed block size, so the consumed sequence is a pure function of
    the generator state — reruns with the same seed are bit-identical.
    """

    BLOCK = 8192

    def __init__(self, gen: np.random.Generator):
        self._gen = gen
        self._uni = ()
        self._exp = ()
        self._iu = 0
        self._ie = 0

    def uniform(self) -> float:
        i = self._iu
        if i >= len(self._uni):
            self._uni = self._gen.random(self.BLOCK).tolist()
            i = 0
        self._iu = i + 1
        return self._uni[i]

    def exponential(self) -> float:
        i = self._ie
        if i >= len(self._exp):
            self._exp = self._gen.standard_exponential(self.BLOCK).tolist()
            i = 0
        self._ie = i + 1
        return self._exp[i]
