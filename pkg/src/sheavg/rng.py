"""Counter-based random number generation.

Every stream in the package is a Philox generator keyed by a 2-word key
``(seed, stream)``.  Distinct keys give statistically independent streams, and
a stream's output is a pure function of its key, so replicas can be simulated
in any batch composition, on any worker count, with bit-identical results.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Fixed stream tags for auxiliary draws, far away from replica ids.
DIRECTION_STREAM = (1 << 62) + 1
GAUSSIAN_SAMPLE_STREAM = (1 << 62) + 2


def philox_generator(seed: int, stream: int) -> np.random.Generator:
    """Return the generator for ``(seed, stream)``."""
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
