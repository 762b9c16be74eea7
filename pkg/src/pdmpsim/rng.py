"""Index-addressable uniform random numbers.

All randomness in a simulation is taken from a :class:`UniformStream`: the
uniform with index ``k`` is a pure function of ``(seed, k)``.  Runs that use
different step sizes or methods therefore see the same realisation, which is
what makes pathwise error comparisons meaningful.

The raw bits come from the Philox4x64-10 counter-based generator shipped
with numpy, keyed by the seed.  Index ``k`` is word ``k % 4`` of the block
produced by counter ``(k // 4 + 1, 0, 0, 0)`` (numpy advances the counter
before each block).  The top 52 bits ``n`` of the word map to
``(n + 0.5) / 2**52``; every such value is an exact double in
``[2**-53, 1 - 2**-53]``, so neither endpoint can be produced by rounding.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

from .errors import DomainError

__all__ = ["UniformStream", "SequenceStream", "UniformSource", "uniform_at"]

_MAX_SEED = 2**64
_SCALE = 2.0**-52


class UniformSource(Protocol):
    def uniform_at(self, index: int) -> float: ...


def _to_open_unit(raw: np.ndarray) -> np.ndarray:
    # top 52 bits, centred in their bin; exact in double precision
    return ((raw >> np.uint64(12)).astype(np.float64) + 0.5) * _SCALE


class UniformStream:
    """Seeded stream of i.i.d. U(0,1) variates addressed by draw index.

    Parameters
    ----------
    seed : int
        Any integer in ``[0, 2**64)``.

    Notes
    -----
    Instances are immutable and may be shared between threads.
    """

    __slots__ = ("_seed",)

    def __init__(self, seed: int):
        if isinstance(seed, bool) or int(seed) != seed:
            raise DomainError(f"seed must be an integer, got {seed!r}")
        seed = int(seed)
        if not 0 <= seed < _MAX_SEED:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self._seed = seed

    @property
    def seed(self) -> int:
        return self._seed

    def __repr__(self) -> str:
        return f"UniformStream(seed={self._seed})"

    def _raw_blocks(self, first_block: int, n_blocks: int) -> np.ndarray:
        bg = np.random.Philox(key=self._seed, counter=[first_block, 0, 0, 0])
        return bg.random_raw(4 * n_blocks)

    def uniform_at(self, index: int) -> float:
        """Return the ``index``-th uniform of the stream."""
        index = int(index)
        if index < 0:
            raise DomainError(f"index must be non-negative, got {index}")
        block, offset = divmod(index, 4)
        raw = self._raw_blocks(block, 1)[offset : offset + 1]
        return float(_to_open_unit(raw)[0])

    def uniforms(self, start: int, count: int) -> np.ndarray:
        """Vectorised ``[uniform_at(k) for k in range(start, start + count)]``."""
        if start < 0 or count < 0:
            raise DomainError("start and count must be non-negative")
        if count == 0:
            return np.empty(0)
        first, offset = divmod(start, 4)
        n_blocks = (offset + count + 3) // 4
        raw = self._raw_blocks(first, n_blocks)[offset : offset + count]
        return _to_open_unit(raw)


class SequenceStream:
    """Replay fixed values, then defer to ``fallback`` (if any).

    Useful as a stub: e.g. a tiny first value forces a huge hazard
    threshold and therefore a jump-free segment.
    """

    def __init__(self, values: Sequence[float], fallback: UniformSource | None = None):
        vals = [float(v) for v in values]
        for v in vals:
            if not 0.0 < v < 1.0:
                raise DomainError(f"stub uniforms must lie in (0,1), got {v}")
        self._values = tuple(vals)
        self._fallback = fallback

    def uniform_at(self, index: int) -> float:
        if index < len(self._values):
            return self._values[index]
        if self._fallback is None:
            raise DomainError(f"stub stream exhausted at index {index}")
        return self._fallback.uniform_at(index)


def uniform_at(stream: UniformSource, index: int) -> float:
    return stream.uniform_at(index)
