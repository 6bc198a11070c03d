"""Deterministic seeded sampling shared by every randomized operation.

The selection algorithm is part of the package's external contract: a given
``(seed, stream, n, m)`` selects the same rows on every run and platform.

Algorithm
---------
* Raw randomness comes from the Philox-4x64 counter-based generator keyed
  with ``key = (seed mod 2**64, stream mod 2**64)``, counter starting at
  zero, consumed as a sequence of unsigned 64-bit words.
* Bounded draws ``bounded(k)`` use unbiased modulo rejection: a raw word
  ``u`` is accepted iff ``u < 2**64 - (2**64 mod k)`` and yields ``u mod k``.
* ``sample_without_replacement(n, m)`` runs a partial Fisher-Yates shuffle
  over ``[0, n)`` (``m`` swap steps, each drawing ``bounded(n - i)``) and
  returns the first ``m`` slots sorted ascending.  Sorting makes ``m == n``
  return the identity selection.

``stream`` is a small integer domain separator so that distinct draw sites
driven by one user seed stay independent.  The assignments below are fixed.
"""

from __future__ import annotations

import numpy as np

from .errors import SampleCountOutOfRange

_MASK64 = (1 << 64) - 1
_CHUNK = 4096

# Fixed stream ids (domain separators). STREAM_SUBSAMPLE is the externally
# documented contract for feature subsampling; the others keep internal draw
# sites independent of it and of each other.
STREAM_SUBSAMPLE = 0
STREAM_MEDIAN = 1
STREAM_CKA_EQUALIZE = 2
STREAM_CKA_CAP = 3
STREAM_ATTACK_RANDOM = 4
STREAM_HISTOGRAM_MATCH = 5
STREAM_SWEEP_BASE = 16  # stream = STREAM_SWEEP_BASE + index into the size list


class SeededStream:
    """Sequential draws from one Philox-keyed raw stream."""

    def __init__(self, seed: int, stream: int = 0):
        self._gen = np.random.Philox(key=[seed & _MASK64, stream & _MASK64])
        self._buf = np.empty(0, dtype=np.uint64)
        self._pos = 0

    def _next_raw(self) -> int:
        if self._pos >= self._buf.size:
            self._buf = self._gen.random_raw(_CHUNK)
            self._pos = 0
        value = int(self._buf[self._pos])
        self._pos += 1
        return value

    def bounded(self, k: int) -> int:
        """Unbiased draw from [0, k) via modulo rejection."""
        if k <= 0:
            raise ValueError(f"bounded() needs k >= 1, got {k}")
        limit = (1 << 64) - ((1 << 64) % k)
        while True:
            u = self._next_raw()
            if u < limit:
                return u % k

    def sample_without_replacement(self, n: int, m: int) -> np.ndarray:
        """Select m distinct indices from [0, n), sorted ascending."""
        if not 0 <= m <= n:
            raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
        slots = np.arange(n, dtype=np.int64)
        for i in range(m):
            j = i + self.bounded(n - i)
            slots[i], slots[j] = slots[j], slots[i]
        chosen = slots[:m]
        chosen.sort()
        return chosen


def sample_without_replacement(n: int, m: int, seed: int, stream: int = 0) -> np.ndarray:
    """One-shot seeded selection of m distinct sorted indices from [0, n)."""
    return SeededStream(seed, stream).sample_without_replacement(n, m)


def check_sample_count(m: int, n: int, minimum: int = 2) -> None:
    """Raise SampleCountOutOfRange unless minimum <= m <= n."""
    if not minimum <= m <= n:
        raise SampleCountOutOfRange(
            f"sample count {m} outside [{minimum}, {n}]"
        )
