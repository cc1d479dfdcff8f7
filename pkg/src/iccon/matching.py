"""AP scoring and selection, the UE-side virtual-cache profiler, and Bloom
filter encodings of cache indexes.

AP identifiers are 0-based positions in the per-AP sequences passed in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .catalogue import make_profile
from .errors import ConfigError


@dataclass(frozen=True)
class FitScore:
    ap: int
    f: float
    l: float
    F: float


def profile_match_f(profile, index):
    """Fraction of the profile's items present in the cache index."""
    items = profile.item_set if hasattr(profile, "item_set") else frozenset(profile)
    if not items:
        raise ConfigError("profile match is undefined for an empty profile")
    index_items = index.items if hasattr(index, "items") else index
    return len(items & index_items) / len(items)


def load_l(ap, users_per_ap):
    """``1 - n_ap / sum(n)``; every AP scores 1 when nobody is attached."""
    total = sum(users_per_ap)
    if total == 0:
        return 1.0
    return 1.0 - users_per_ap[ap] / total


def _check_unit(name, x):
    if not 0.0 <= x <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {x!r}")


def fit_F(f, l, w):
    _check_unit("f", f)
    _check_unit("l", l)
    _check_unit("w", w)
    return w * f + (1.0 - w) * l


def score_aps(profile, indexes, users_per_ap, w):
    """FitScore for every AP. APs sharing a cache pass the same index."""
    if len(indexes) != len(users_per_ap):
        raise ConfigError("need one cache index and one load per AP")
    items = profile.item_set
    u = len(items)
    if u == 0:
        raise ConfigError("profile match is undefined for an empty profile")
    scores = []
    matches = {}
    for ap, index in enumerate(indexes):
        # shared caches are intersected once
        key = id(index)
        if key not in matches:
            matches[key] = len(items & index.items) / u
        f = matches[key]
        l = load_l(ap, users_per_ap)
        scores.append(FitScore(ap, f, l, fit_F(f, l, w)))
    return scores


def argmax_lowest(values):
    """Index of the largest value, lowest index on ties."""
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


def select_ap(profile, indexes, users_per_ap, w):
    """The AP with the highest fit for ``profile``; ties go to the lowest id."""
    if not indexes:
        raise ConfigError("at least one AP is required")
    scores = score_aps(profile, indexes, users_per_ap, w)
    return scores[argmax_lowest([s.F for s in scores])]


class VirtualCacheProfiler:
    """Request counters with no capacity bound and no payload."""

    def __init__(self):
        self.counts = {}
        self.last = {}
        self.tick = 0

    def record(self, item):
        self.tick += 1
        self.counts[item] = self.counts.get(item, 0) + 1
        self.last[item] = self.tick
        return self

    def count(self, item):
        return self.counts.get(item, 0)

    def top_items(self, k):
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        ranked = sorted(self.counts, key=lambda x: (-self.counts[x], -self.last[x], x))
        return ranked[:k]

    def top(self, k, catalogue):
        """The ``k`` most requested items as a profile weighted by ``catalogue``."""
        return make_profile(catalogue, self.top_items(k))


def profiler_record(profiler, item):
    return profiler.record(item)


def profiler_top(profiler, k, catalogue):
    return profiler.top(k, catalogue)


def bloom_optimal_k(m, n):
    if m < 1 or n < 1:
        raise ConfigError("Bloom filter size and item count must be >= 1")
    return max(1, math.floor(m / n * math.log(2) + 0.5))


def bloom_theoretical_fpr(m, n, k):
    if n == 0:
        return 0.0
    return (1.0 - math.exp(-k * n / m)) ** k


_QUERY_BLOCK = 1 << 16


def _splitmix64(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


class BloomFilter:
    """Bloom filter over integer ids using double hashing ``h1 + i*h2 mod m``.

    ``h1`` and ``h2`` are splitmix64 finalizers of the id xor-ed with two
    seed-derived salts, so bit positions are fixed by ``(m, k, seed)``.
    """

    def __init__(self, m, k, seed=0):
        if m < 1 or k < 1:
            raise ConfigError("Bloom filter needs m >= 1 bits and k >= 1 hashes")
        self.m = int(m)
        self.k = int(k)
        self.seed = int(seed)
        self.bits = np.zeros(self.m, dtype=bool)
        self.n_inserted = 0
        salts = _splitmix64(np.array([2 * self.seed, 2 * self.seed + 1], dtype=np.uint64))
        self._salt1, self._salt2 = salts[0], salts[1]
        self._steps = np.arange(self.k, dtype=np.uint64)

    def _positions(self, ids):
        ids = np.asarray(ids, dtype=np.int64).astype(np.uint64)
        with np.errstate(over="ignore"):
            h1 = _splitmix64(ids ^ self._salt1)
            h2 = _splitmix64(ids ^ self._salt2) | np.uint64(1)
            pos = h1[:, None] + self._steps[None, :] * h2[:, None]
        return (pos % np.uint64(self.m)).astype(np.int64)

    def insert_many(self, ids):
        ids = np.atleast_1d(ids)
        self.bits[self._positions(ids).ravel()] = True
        self.n_inserted += len(ids)

    def query_many(self, ids):
        ids = np.atleast_1d(ids)
        out = np.empty(len(ids), dtype=bool)
        for start in range(0, len(ids), _QUERY_BLOCK):
            block = ids[start:start + _QUERY_BLOCK]
            out[start:start + len(block)] = self.bits[self._positions(block)].all(axis=1)
        return out

    def insert(self, item):
        self.insert_many([item])

    def query(self, item):
        return bool(self.query_many([item])[0])

    def __contains__(self, item):
        return self.query(item)

    def theoretical_fpr(self):
        return bloom_theoretical_fpr(self.m, self.n_inserted, self.k)


def bloom_insert(bf, item):
    bf.insert(item)


def bloom_query(bf, item):
    return bf.query(item)


def bloom_from_index(index, m, k=None, seed=0):
    """Encode a cache index; ``k`` defaults to the optimum for its size."""
    n = max(len(index.items), 1)
    bf = BloomFilter(m, k if k is not None else bloom_optimal_k(m, n), seed)
    if index.items:
        bf.insert_many(np.fromiter(index.items, dtype=np.int64))
    return bf


def approx_match_f(profile, bloom):
    """Profile match computed against a Bloom-encoded index (never underestimates)."""
    items = profile.items
    if len(items) == 0:
        raise ConfigError("profile match is undefined for an empty profile")
    return float(np.count_nonzero(bloom.query_many(items))) / len(items)
