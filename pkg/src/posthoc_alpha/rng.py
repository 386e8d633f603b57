"""Counter-based random streams.

Every uniform is a pure function of ``(seed, trial, draw)``: the SplitMix64
finalizer applied to ``key + counter * GAMMA`` where ``key`` is derived from
the seed and ``counter = trial * DRAWS_PER_TRIAL + draw``.  A trial's
substream therefore never depends on how trials are split across workers.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
DRAWS_PER_TRIAL = 4
_ULP53 = 2.0**-53


def _mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def seed_key(seed: int) -> int:
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return _mix64(_mix64(seed) ^ 0x5851F42D4C957F2D)


class TrialStream:
    """Sequential draws from the substream of a single trial."""

    def __init__(self, seed: int, trial: int = 0):
        self.seed = seed
        self.trial = trial
        self._key = seed_key(seed)
        self._draw = 0

    def _next_bits(self) -> int:
        if self._draw >= DRAWS_PER_TRIAL:
            raise RuntimeError(f"trial substream exhausted after {DRAWS_PER_TRIAL} draws")
        counter = self.trial * DRAWS_PER_TRIAL + self._draw
        self._draw += 1
        return _mix64(self._key + (counter + 1) * GAMMA)

    def uniform(self) -> float:
        """Uniform on (0, 1]."""
        return ((self._next_bits() >> 11) + 1) * _ULP53

    def open_uniform(self) -> float:
        """Uniform on (0, 1), midpoint of a 2**-53 grid cell."""
        return ((self._next_bits() >> 11) + 0.5) * _ULP53


class CounterRNG:
    """Vectorised access to the same per-trial substreams as :class:`TrialStream`."""

    def __init__(self, seed: int):
        self.seed = seed
        self._key = np.uint64(seed_key(seed))

    def _bits(self, start: int, stop: int, draw: int) -> np.ndarray:
        counter = np.arange(start, stop, dtype=np.uint64) * np.uint64(DRAWS_PER_TRIAL) + np.uint64(draw + 1)
        return _mix64_array(self._key + counter * np.uint64(GAMMA))

    def uniform(self, start: int, stop: int, draw: int = 0) -> np.ndarray:
        bits = self._bits(start, stop, draw) >> np.uint64(11)
        return (bits.astype(np.float64) + 1.0) * _ULP53

    def open_uniform(self, start: int, stop: int, draw: int = 0) -> np.ndarray:
        bits = self._bits(start, stop, draw) >> np.uint64(11)
        return (bits.astype(np.float64) + 0.5) * _ULP53

    def stream(self, trial: int) -> TrialStream:
        return TrialStream(self.seed, trial)
