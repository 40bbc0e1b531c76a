"""SplitMix64 stream used to fill the reference encoder's weights.

SplitMix64 is a tiny, well-specified 64-bit generator whose full state is a
single counter, which makes weight initialization reproducible bit-for-bit
in any implementation language. Raw outputs are mapped to uniform floats in
[-0.1, 0.1) via ``(u >> 11) * 2**-53 * 0.2 - 0.1``: the top 53 bits become a
uniform double in [0, 1) and the affine map rescales it.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Sequential SplitMix64 generator over python integers."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def next_uniform(self) -> float:
        """Next float in [-0.1, 0.1), uniform over the 53-bit grid."""
        return (self.next_uint64() >> 11) * 2.0**-53 * 0.2 - 0.1

    def fill(self, *shape: int) -> np.ndarray:
        """Row-major float64 array of the given shape from the stream."""
        n = 1
        for dim in shape:
            n *= dim
        flat = np.empty(n, dtype=np.float64)
        for i in range(n):
            flat[i] = self.next_uniform()
        return flat.reshape(shape)
