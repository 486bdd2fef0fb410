"""Counter-based random substreams keyed by (seed, trial, party).

Every random decision in a trial comes from a stream derived from the root
seed, the trial index and the label of the party (or device) making it.
Streams are stateless hashes of a draw counter, so trials can run in any
order, in parallel, or in separate processes and still replay bit for bit.

The same hash is available column-wise over numpy arrays so that a batch of
trials reproduces exactly what the per-trial code would draw.
"""

from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_DOUBLE_UNIT = 2.0 ** -53


def party_id(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def _mix(z: int) -> int:
    z = (z + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, trial_index: int, party: str) -> int:
    if seed < 0 or trial_index < 0:
        raise ValueError("seed and trial_index must be non-negative")
    k = _mix(seed & MASK64)
    k = _mix(k ^ (trial_index & MASK64))
    return _mix(k ^ party_id(party))


class Substream:
    """Deterministic per-(seed, trial, party) random stream."""

    __slots__ = ("seed", "trial_index", "party", "key", "_counter")

    def __init__(self, seed: int, trial_index: int, party: str):
        self.seed = seed
        self.trial_index = trial_index
        self.party = party
        self.key = stream_key(seed, trial_index, party)
        self._counter = 0

    def __repr__(self) -> str:
        return (f"Substream(seed={self.seed}, trial_index={self.trial_index}, "
                f"party={self.party!r}, drawn={self._counter})")

    @property
    def drawn(self) -> int:
        return self._counter

    def next_u64(self) -> int:
        value = _mix((self.key + self._counter * _GOLDEN) & MASK64)
        self._counter += 1
        return value

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _DOUBLE_UNIT

    def bit(self) -> int:
        return self.next_u64() >> 63

    def integers(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n < 1:
            raise ValueError("n must be positive")
        return min(int(self.random() * n), n - 1)

    def generator(self) -> np.random.Generator:
        # Independent of the draw counter: same stream key, same generator.
        return np.random.default_rng([self.key & 0xFFFFFFFF, self.key >> 32])


def column_u64(seed: int, trial_indices: np.ndarray, party: str,
               draw: int = 0) -> np.ndarray:
    """The ``draw``-th raw value of each trial's substream, as a column."""
    trials = np.asarray(trial_indices, dtype=np.uint64)
    k = np.full(trials.shape, _mix(seed & MASK64), dtype=np.uint64)
    k = _mix_array(k ^ trials)
    k = _mix_array(k ^ np.uint64(party_id(party)))
    offset = np.uint64((draw * _GOLDEN) & MASK64)
    return _mix_array(k + offset)


def column_random(seed: int, trial_indices: np.ndarray, party: str,
                  draw: int = 0) -> np.ndarray:
    values = column_u64(seed, trial_indices, party, draw)
    return (values >> np.uint64(11)).astype(np.float64) * _DOUBLE_UNIT


def column_bit(seed: int, trial_indices: np.ndarray, party: str,
               draw: int = 0) -> np.ndarray:
    values = column_u64(seed, trial_indices, party, draw)
    return (values >> np.uint64(63)).astype(np.int8)
