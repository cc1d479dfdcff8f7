import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iccon import _kernels as K
from iccon.caching import (
    CacheIndex,
    LfuCache,
    LruCache,
    export_index,
    lfu_access,
    lru_access,
    make_cache,
    replay,
    steady_state_lfu_chr,
)
from iccon.catalogue import build_catalogue, sample_items
from iccon.errors import ConfigError


class BruteLfu:
    """Resident set recomputed from scratch: top-c seen items by (count, last)."""

    def __init__(self, capacity):
        self.capacity = capacity
        self.counts = {}
        self.last = {}
        self.t = 0
        self.resident = set()

    def access(self, item):
        hit = item in self.resident
        self.t += 1
        self.counts[item] = self.counts.get(item, 0) + 1
        self.last[item] = self.t
        ranked = sorted(self.counts, key=lambda x: (self.counts[x], self.last[x]), reverse=True)
        self.resident = set(ranked[: self.capacity])
        return hit


class BruteLru:
    def __init__(self, capacity):
        self.capacity = capacity
        self.order = []

    def access(self, item):
        hit = item in self.order
        if hit:
            self.order.remove(item)
        self.order.append(item)
        if len(self.order) > self.capacity:
            self.order.pop(0)
        return hit


def kernel_replay(policy, capacity, C, trace):
    bank = K.CacheBank(1, capacity, C, policy)
    hits = np.zeros(len(trace), dtype=np.int64)
    K.replay_trace(*bank.arrays(), 0, np.asarray(trace, dtype=np.int64), hits)
    return bank, hits.astype(bool).tolist()


def test_lfu_keeps_frequent_item():
    cache = LfuCache(1)
    assert replay(cache, [1, 1, 2]) == [False, True, False]
    assert set(cache.resident) == {1}


def test_lfu_two_slots():
    a, b, c = 1, 2, 3
    cache = LfuCache(2)
    replay(cache, [a, b, a, c, c, c])
    assert set(cache.resident) == {a, c}


def test_lfu_zero_capacity():
    cache = LfuCache(0)
    assert replay(cache, [1, 1, 2, 1]) == [False] * 4
    assert len(cache) == 0


def test_lfu_access_function():
    cache = LfuCache(1)
    assert lfu_access(cache, 5) is False
    assert lfu_access(cache, 5) is True


def test_lru_textbook():
    a, b, c = 1, 2, 3
    cache = LruCache(2)
    assert replay(cache, [a, b, a, c]) == [False, False, True, False]
    assert set(cache.resident) == {a, c}


def test_lru_single_slot():
    assert replay(LruCache(1), [1, 2, 1]) == [False, False, False]


def test_lru_second_pass_hits():
    cache = LruCache(3)
    replay(cache, [3, 1, 2])
    assert replay(cache, [2, 3, 1]) == [True, True, True]
    assert lru_access(cache, 1) is True


def test_negative_capacity_rejected():
    with pytest.raises(ConfigError):
        LfuCache(-1)
    with pytest.raises(ConfigError):
        make_cache("fifo", 3)


def test_empty_index():
    assert export_index(LfuCache(3)).items == frozenset()


def test_index_after_two_accesses():
    cache = LruCache(2)
    replay(cache, [4, 9])
    index = export_index(cache)
    assert index.items == {4, 9}
    assert index.taken_at == 2


def test_index_snapshot_is_immutable():
    rng = np.random.default_rng(0)
    for cache in (LfuCache(5), LruCache(5)):
        replay(cache, [1, 2, 3])
        index = export_index(cache)
        replay(cache, rng.integers(1, 50, 100))
        assert index.items == {1, 2, 3}
        assert isinstance(index, CacheIndex)


def test_steady_state_edges():
    cat = build_catalogue(20, 0.8)
    assert steady_state_lfu_chr(cat, 20) == 1.0
    assert steady_state_lfu_chr(cat, 0) == 0.0
    assert steady_state_lfu_chr(build_catalogue(2, 1), 1) == pytest.approx(2 / 3)
    with pytest.raises(ConfigError):
        steady_state_lfu_chr(cat, 21)


traces = st.lists(st.integers(1, 30), min_size=1, max_size=400)


@settings(max_examples=150, deadline=None)
@given(trace=traces, capacity=st.integers(0, 10))
def test_lfu_matches_brute_force(trace, capacity):
    fast, brute = LfuCache(capacity), BruteLfu(capacity)
    for x in trace:
        assert fast.access(x) == brute.access(x)
        assert set(fast.resident) == brute.resident
        assert len(fast) <= capacity


@settings(max_examples=150, deadline=None)
@given(trace=traces, capacity=st.integers(0, 10))
def test_lfu_residency_property(trace, capacity):
    cache = LfuCache(capacity)
    for x in trace:
        cache.access(x)
        outside = [cache._key(y) for y in cache.counts if y not in cache.resident]
        inside = [cache._key(y) for y in cache.resident]
        if inside and outside:
            assert min(inside) > max(outside)
            # no non-resident item has a strictly larger count
            assert min(k[0] for k in inside) >= max(k[0] for k in outside)


@settings(max_examples=150, deadline=None)
@given(trace=traces, capacity=st.integers(0, 10))
def test_lru_matches_brute_force(trace, capacity):
    fast, brute = LruCache(capacity), BruteLru(capacity)
    for x in trace:
        assert fast.access(x) == brute.access(x)
        assert fast.recency() == brute.order


def test_lru_long_random_traces():
    rng = np.random.default_rng(11)
    for _ in range(5):
        C = int(rng.integers(2, 51))
        capacity = int(rng.integers(1, 11))
        trace = rng.integers(1, C + 1, 10_000).tolist()
        fast, brute = LruCache(capacity), BruteLru(capacity)
        assert replay(fast, trace) == [brute.access(x) for x in trace]
        assert fast.recency() == brute.order


def test_lfu_long_random_trace_full_scan():
    rng = np.random.default_rng(12)
    cat = build_catalogue(100, 0.8)
    trace = sample_items(cat, rng, 3000).tolist()
    fast, brute = LfuCache(10), BruteLfu(10)
    for x in trace:
        assert fast.access(x) == brute.access(x)
    assert set(fast.resident) == brute.resident


@pytest.mark.parametrize("policy, ref", [(K.LFU, LfuCache), (K.LRU, LruCache)])
@pytest.mark.parametrize("capacity", [0, 1, 7, 50])
def test_kernel_matches_reference(policy, ref, capacity):
    rng = np.random.default_rng(capacity)
    cat = build_catalogue(300, 0.8)
    trace = sample_items(cat, rng, 20_000)
    bank, hits = kernel_replay(policy, capacity, 300, trace)
    cache = ref(capacity)
    assert hits == replay(cache, trace)
    assert set(bank.resident(0).tolist()) == set(cache.resident)
    if policy == K.LRU:
        assert bank.resident(0).tolist() == cache.recency()
    else:
        for item in range(1, 301):
            assert bank.count(0, item) == cache.counts.get(item, 0)


def test_kernel_lfu_scenarios():
    _, hits = kernel_replay(K.LFU, 1, 5, [1, 1, 2])
    assert hits == [False, True, False]
    bank, _ = kernel_replay(K.LFU, 2, 5, [1, 2, 1, 3, 3, 3])
    assert set(bank.resident(0).tolist()) == {1, 3}


def test_lfu_simulation_near_analytic_steady_state():
    cat = build_catalogue(1000, 0.8)
    trace = sample_items(cat, np.random.default_rng(0), 400_000)
    _, hits = kernel_replay(K.LFU, 50, 1000, trace)
    tail = np.mean(hits[-100_000:])
    assert abs(tail - steady_state_lfu_chr(cat, 50)) < 0.02
