"""Capacity-bounded LFU and LRU caches with index snapshots.

These are the reference implementations: small, readable and used for the
analytic oracles and brute-force cross-checks. The simulator runs the same
policies through the compiled kernels in :mod:`iccon._kernels`.
"""
from __future__ import annotations

import heapq
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class CacheIndex:
    """Immutable snapshot of a cache's resident items."""

    items: frozenset
    taken_at: int = 0

    def __len__(self):
        return len(self.items)

    def __contains__(self, item):
        return item in self.items


class LfuCache:
    """Perfect LFU.

    Counters are kept for every item ever requested, resident or not. The
    resident set is the top ``capacity`` items under (count, last access)
    descending; a missed item is admitted only if its key beats the weakest
    resident's.
    """

    def __init__(self, capacity):
        if capacity < 0:
            raise ConfigError(f"cache capacity must be >= 0, got {capacity}")
        self.capacity = int(capacity)
        self.counts = {}
        self.last = {}
        self.resident = set()
        self.tick = 0
        self._heap = []

    def _key(self, item):
        return (self.counts[item], self.last[item], -item)

    def _push(self, item):
        heapq.heappush(self._heap, (*self._key(item), item))
        if len(self._heap) > 4 * self.capacity + 64:
            self._heap = [(*self._key(x), x) for x in self.resident]
            heapq.heapify(self._heap)

    def _weakest(self):
        heap = self._heap
        while True:
            count, last, neg, item = heap[0]
            if item in self.resident and self.counts[item] == count and self.last[item] == last:
                return item
            heapq.heappop(heap)

    def access(self, item):
        """Record a request; return True on a hit."""
        self.tick += 1
        self.counts[item] = self.counts.get(item, 0) + 1
        self.last[item] = self.tick
        if item in self.resident:
            self._push(item)
            return True
        if self.capacity == 0:
            return False
        if len(self.resident) < self.capacity:
            self.resident.add(item)
            self._push(item)
            return False
        victim = self._weakest()
        if self._key(item) > self._key(victim):
            heapq.heappop(self._heap)
            self.resident.discard(victim)
            self.resident.add(item)
            self._push(item)
        return False

    def __len__(self):
        return len(self.resident)

    def __contains__(self, item):
        return item in self.resident


class LruCache:
    def __init__(self, capacity):
        if capacity < 0:
            raise ConfigError(f"cache capacity must be >= 0, got {capacity}")
        self.capacity = int(capacity)
        self.tick = 0
        self._order = OrderedDict()

    @property
    def resident(self):
        return self._order.keys()

    def access(self, item):
        """Record a request; return True on a hit."""
        self.tick += 1
        order = self._order
        if item in order:
            order.move_to_end(item)
            return True
        if self.capacity == 0:
            return False
        if len(order) >= self.capacity:
            order.popitem(last=False)
        order[item] = None
        return False

    def recency(self):
        """Resident items, least recently used first."""
        return list(self._order)

    def __len__(self):
        return len(self._order)

    def __contains__(self, item):
        return item in self._order


def lfu_access(cache, item):
    return cache.access(item)


def lru_access(cache, item):
    return cache.access(item)


def make_cache(policy, capacity):
    if policy == "lfu":
        return LfuCache(capacity)
    if policy == "lru":
        return LruCache(capacity)
    raise ConfigError(f"unknown cache policy {policy!r}")


def export_index(cache):
    return CacheIndex(items=frozenset(cache.resident), taken_at=cache.tick)


def steady_state_lfu_chr(catalogue, c):
    """Hit ratio of a perfect-LFU cache holding the ``c`` most popular items."""
    if not 0 <= c <= catalogue.C:
        raise ConfigError(f"cache size must lie in [0, {catalogue.C}], got {c}")
    if c == catalogue.C:
        return 1.0
    return float(np.sum(catalogue.p[:c]))


def replay(cache, trace):
    """Feed ``trace`` through ``cache``; return the per-access hit flags."""
    return [cache.access(int(x)) for x in trace]
