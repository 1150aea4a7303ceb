"""Deterministic random streams.

All randomness in the package comes from one documented scheme, so that
a seed reproduces the same bits on any platform and NumPy version:

* raw 64-bit words from NumPy's ``PCG64`` bit generator seeded with
  ``PCG64(seed)`` (the bit generator stream is stable, unlike the
  distribution methods of ``numpy.random.Generator``);
* uniform doubles in (0, 1] from the top 53 bits: ``((w >> 11) + 1) * 2**-53``;
* standard normals by the Box-Muller transform on consecutive uniform pairs;
* bounded integers by ``w % bound`` (bias below 2**-40 for the sizes used here).

Only integer arithmetic and ``sqrt`` are exact across machines. ``log`` and
``cos`` come from NumPy's math kernels, so normal draws are bit-identical for
a given NumPy build and agree to within a few ulp elsewhere.
"""

import numpy as np

SCHEME = "pcg64-raw/u53/box-muller/v1"

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


class Stream:
    """Sequential consumer of the PCG64 raw word stream."""

    def __init__(self, seed):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self._bits = np.random.PCG64(seed)

    def words(self, count):
        if count == 0:
            return np.zeros(0, dtype=np.uint64)
        return np.asarray(self._bits.random_raw(count), dtype=np.uint64)

    def uniform(self, count):
        w = self.words(count)
        return ((w >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _INV_2_53

    def normal(self, count):
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log(u[:, 0]))
        angle = _TWO_PI * u[:, 1]
        out = np.empty((pairs, 2))
        out[:, 0] = radius * np.cos(angle)
        out[:, 1] = radius * np.sin(angle)
        return out.reshape(-1)[:count]

    def integers(self, bound, count):
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self.words(count) % np.uint64(bound)).astype(np.int64)
