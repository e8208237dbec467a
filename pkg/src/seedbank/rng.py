"""Counter-based random streams.

Every random number is a pure function of ``(seed, purpose, replicate, counter)``:
the SplitMix64 finaliser is applied to ``key + (counter + 1) * GOLDEN`` where the
key is itself a mix of seed, purpose and replicate index.  Replicates therefore
never share state, and results do not depend on the order (or the process) in
which replicates are evaluated.  The compiled kernels implement the identical
arithmetic, so both backends see the same uniforms.
"""
from __future__ import annotations

import enum
import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
PURPOSE_MULT = 0xD1B54A32D192ED03
_TWO_M53 = 1.0 / 9007199254740992.0


class Purpose(enum.IntEnum):
    """Stream purposes; one global seed expands into one stream per (purpose, replicate)."""

    FORWARD = 1
    WF = 2
    DUAL = 3
    COALESCENT = 4
    ANCESTRAL = 5
    RATE = 6


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, purpose: int, rep: int) -> int:
    k = mix64(mix64(seed & MASK64) ^ ((int(purpose) * PURPOSE_MULT) & MASK64))
    return mix64(k + (rep & MASK64) * GOLDEN)


def stream_keys(seed: int, purpose: int, reps, start: int = 0) -> np.ndarray:
    """Keys for replicates ``start .. start + reps - 1`` as a uint64 array."""
    base = mix64(mix64(seed & MASK64) ^ ((int(purpose) * PURPOSE_MULT) & MASK64))
    idx = np.arange(start, start + reps, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64_array(np.uint64(base) + idx * np.uint64(GOLDEN))


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def uniform_from_bits(bits):
    """Map 64 random bits to a double in the open interval (0, 1)."""
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def uniforms(keys: np.ndarray, counters) -> np.ndarray:
    """Uniform (0, 1) variates at ``counters`` for each key (broadcasting)."""
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = mix64_array(keys + (counters + np.uint64(1)) * np.uint64(GOLDEN))
    return uniform_from_bits(bits)


def normals(keys: np.ndarray, index) -> np.ndarray:
    """Standard normals via Box-Muller on counters ``2*index`` and ``2*index + 1``."""
    index = np.asarray(index, dtype=np.uint64)
    u1 = uniforms(keys, index * np.uint64(2))
    u2 = uniforms(keys, index * np.uint64(2) + np.uint64(1))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


class Stream:
    """Sequential view of one counter-based stream, for scalar (object-level) simulation."""

    __slots__ = ("seed", "purpose", "rep", "key", "counter")

    def __init__(self, seed: int = 0, purpose: int = Purpose.FORWARD, rep: int = 0):
        self.seed = int(seed)
        self.purpose = int(purpose)
        self.rep = int(rep)
        self.key = stream_key(self.seed, self.purpose, self.rep)
        self.counter = 0

    def uniform(self) -> float:
        bits = mix64(self.key + (self.counter + 1) * GOLDEN)
        self.counter += 1
        return ((bits >> 11) + 0.5) * _TWO_M53

    def uniforms(self, n: int) -> np.ndarray:
        out = uniforms(np.uint64(self.key), np.arange(self.counter, self.counter + n, dtype=np.uint64))
        self.counter += n
        return out

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def exponential(self, rate: float) -> float:
        return -math.log(self.uniform()) / rate

    def choice(self, weights) -> int:
        """Index drawn with probability proportional to ``weights``."""
        total = math.fsum(weights)
        target = self.uniform() * total
        acc = 0.0
        last = 0
        for i, w in enumerate(weights):
            if w <= 0.0:
                continue
            acc += w
            last = i
            if target < acc:
                return i
        return last


def as_stream(rng, purpose: int = Purpose.FORWARD) -> Stream:
    """Accept a Stream, an integer seed or None (seed 0)."""
    if isinstance(rng, Stream):
        return rng
    return Stream(0 if rng is None else int(rng), purpose)
