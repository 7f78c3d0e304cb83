import numpy as np


class MaskTable:
    """Vectorised helpers over all subsets of n agents (bit a = agent a)"""

    def __init__(self, n: int):
        self.n = n
        self.size = 1 << n
        self.full = self.size - 1
        self.masks = np.arange(self.size, dtype=np.int64)
        self._has = [((self.masks >> bit) & 1).astype(bool) for bit in range(n)]
        self._without = [self.masks & ~(1 << bit) for bit in range(n)]
        self.popcount = np.zeros(self.size, dtype=np.int64)
        for bit in range(n):
            self.popcount += self._has[bit]

    def has(self, bit: int) -> np.ndarray:
        """Boolean selector of masks containing agent `bit`"""
        return self._has[bit]

    def without(self, bit: int) -> np.ndarray:
        """Index of each mask with agent `bit` cleared"""
        return self._without[bit]
