"""Deterministic counter-based random streams.

Every random quantity in the package is drawn from a splitmix64 stream
addressed by (seed, path...). Because the splitmix64 state sequence is
``state0 + GOLDEN * i``, the i-th raw output is a pure function of
(state0, i), so sequential kernels (numba) and level-vectorized kernels
(numpy) consume identical draws. Raw 64-bit outputs are bit-identical
across both paths; derived floats (normals) can differ in the last ulp
because of libm vs SIMD transcendentals.

Draw conventions, shared by all kernels:
  - uniform(i)   consumes raw output i, maps to (0, 1]
  - normal(j)    consumes raw outputs 2j and 2j+1 (Box-Muller, cosine half)
  - binomial     one uniform per draw, inverted through a CDF table
"""

import numpy as np
from scipy.stats import binom

from ._accel import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_U_GOLDEN = np.uint64(GOLDEN)
_U_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_U_MIX2 = np.uint64(0x94D049BB133111EB)
_U_30 = np.uint64(30)
_U_27 = np.uint64(27)
_U_31 = np.uint64(31)
_U_11 = np.uint64(11)
_U_1 = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53
_TWO_PI = 6.283185307179586476925287

# stream tags: first path element of derive_stream, one per consumer
TAG_GROWTH = 1
TAG_VALUES = 2
TAG_SPLIT = 3
TAG_LATTICE = 4
TAG_DATASET = 5
TAG_MULTINOMIAL = 6
TAG_SWEEP = 7
TAG_CALIB = 8
TAG_EVAL = 9


def mix64(z: int) -> int:
    """splitmix64 output mix (python ints, wrap-around at 64 bits)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_stream(seed: int, *path: int) -> int:
    """Derive an independent stream state from a seed and an integer path.

    Each distinct (seed, path) pair maps to a statistically independent
    splitmix64 stream; discarded work in one stream never shifts another.
    """
    s = mix64((seed & MASK64) ^ 0x6A09E667F3BCC908)
    for p in path:
        s = mix64(s ^ mix64(((p & MASK64) + GOLDEN) & MASK64))
    return s


# --- vectorized (numpy) draw helpers -------------------------------------

def raw_block(state: int, start: int, n: int) -> np.ndarray:
    """Raw outputs [start, start+n) of the stream, as uint64."""
    idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    z = np.uint64(state) + _U_GOLDEN * idx
    z = (z ^ (z >> _U_30)) * _U_MIX1
    z = (z ^ (z >> _U_27)) * _U_MIX2
    return z ^ (z >> _U_31)


def uniform_block(state: int, start: int, n: int) -> np.ndarray:
    """Uniforms in (0, 1] at draw indices [start, start+n)."""
    raw = raw_block(state, start, n)
    return ((raw >> _U_11).astype(np.float64) + 1.0) * _INV53


def normal_block(state: int, start: int, n: int) -> np.ndarray:
    """Standard normals at normal indices [start, start+n)."""
    u = uniform_block(state, 2 * start, 2 * n)
    r = np.sqrt(-2.0 * np.log(u[0::2]))
    return r * np.cos(_TWO_PI * u[1::2])


class Stream:
    """Sequential convenience wrapper over a counter-based stream."""

    def __init__(self, state: int):
        self.state = state & MASK64
        self.counter = 0

    @classmethod
    def from_path(cls, seed: int, *path: int) -> "Stream":
        return cls(derive_stream(seed, *path))

    def raw(self, n: int) -> np.ndarray:
        out = raw_block(self.state, self.counter, n)
        self.counter += n
        return out

    def uniform(self, n: int) -> np.ndarray:
        return ((self.raw(n) >> _U_11).astype(np.float64) + 1.0) * _INV53

    def normal(self, n: int) -> np.ndarray:
        u = self.uniform(2 * n)
        return np.sqrt(-2.0 * np.log(u[0::2])) * np.cos(_TWO_PI * u[1::2])

    def integers(self, n: int, bound: int) -> np.ndarray:
        """n integers in [0, bound). Modulo bias is O(bound/2**64)."""
        return (self.raw(n) % np.uint64(bound)).astype(np.int64)

    def categorical(self, cdf: np.ndarray, n: int) -> np.ndarray:
        """n draws from the distribution with cumulative weights ``cdf``."""
        return np.searchsorted(cdf, self.uniform(n), side="left")

    def sample_distinct(self, k: int, bound: int) -> np.ndarray:
        """k distinct integers from [0, bound), in draw order."""
        if k > bound:
            raise ValueError(f"cannot draw {k} distinct values from {bound}")
        picked = np.empty(0, dtype=np.int64)
        while picked.size < k:
            batch = self.integers(max(2 * (k - picked.size), 16), bound)
            both = np.concatenate([picked, batch])
            _, first = np.unique(both, return_index=True)
            picked = both[np.sort(first)]
        return picked[:k]


def binomial_cdf(n: int, p: float) -> np.ndarray:
    """CDF table for Binomial(n, p); table[k] = P(X <= k), table[n] = 1."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    table = binom.cdf(np.arange(n + 1), n, p)
    table[-1] = 1.0
    return np.ascontiguousarray(table)


# --- scalar (numba) draw helpers ------------------------------------------
# Same conventions as the vectorized helpers; used inside sequential kernels.

@njit(cache=True)
def raw_at(state, index):
    z = state + _U_GOLDEN * (np.uint64(index) + _U_1)
    z = (z ^ (z >> _U_30)) * _U_MIX1
    z = (z ^ (z >> _U_27)) * _U_MIX2
    return z ^ (z >> _U_31)


@njit(cache=True)
def uniform_at(state, index):
    return (np.float64(raw_at(state, index) >> _U_11) + 1.0) * _INV53


@njit(cache=True)
def normal_at(state, j):
    u1 = uniform_at(state, 2 * j)
    u2 = uniform_at(state, 2 * j + 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


@njit(cache=True)
def table_sample(cdf, u):
    """Smallest k with u <= cdf[k]; expected O(1) scan near criticality."""
    k = 0
    last = len(cdf) - 1
    while k < last and u > cdf[k]:
        k += 1
    return k
