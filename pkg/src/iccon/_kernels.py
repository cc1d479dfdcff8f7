"""Compiled inner loops for the simulator.

A bank of ``K`` caches lives in three packed arrays:

* ``meta[k, item]``: request count, last access tick, heap slot / resident
  flag (-1 when absent), and LRU prev/next links
* ``heap[k, i]``: LFU min-heap entries (item, count, last access)
* ``st[k]``: size, tick, LRU head and tail, and the (admitted, evicted) pair
  of the latest access, 0 meaning none

LFU keeps counters for every item it has seen and orders residents by
(count, last access); the weakest resident sits at the heap root. LRU keeps
residents on a doubly linked recency list.

Requests are generated inside the loops from uniforms drawn by the caller, so
all randomness stays in numpy ``Generator`` streams.
"""
from __future__ import annotations

import numpy as np
from numba import njit

LFU = 0
LRU = 1

COUNT, LAST, POS, PREV, NEXT = range(5)
H_ITEM, H_COUNT, H_LAST = range(3)
SIZE, TICK, HEAD, TAIL, ADMITTED, EVICTED = range(6)


class CacheBank:
    def __init__(self, K, capacity, C, policy):
        self.K = K
        self.capacity = capacity
        self.C = C
        self.policy = policy
        self.meta = np.zeros((K, C + 1, 5), dtype=np.int64)
        self.meta[:, :, POS] = -1
        self.heap = np.zeros((K, max(capacity, 1), 3), dtype=np.int64)
        self.st = np.zeros((K, 6), dtype=np.int64)

    def arrays(self):
        return self.policy, self.capacity, self.meta, self.heap, self.st

    @property
    def tick(self):
        return self.st[:, TICK]

    @property
    def size(self):
        return self.st[:, SIZE]

    def count(self, k, item):
        return int(self.meta[k, item, COUNT])

    def resident(self, k):
        """Resident items of cache ``k`` (LRU: least recent first)."""
        if self.policy == LFU:
            return self.heap[k, : self.st[k, SIZE], H_ITEM].copy()
        return _lru_order(self.meta, self.st, k)


@njit(cache=True)
def _lru_order(meta, st, k):
    out = np.empty(st[k, SIZE], dtype=np.int64)
    item = st[k, HEAD]
    for i in range(out.shape[0]):
        out[i] = item
        item = meta[k, item, NEXT]
    return out


@njit(cache=True, inline="always")
def _heap_set(meta, heap, k, i, item, c, t):
    heap[k, i, H_ITEM] = item
    heap[k, i, H_COUNT] = c
    heap[k, i, H_LAST] = t
    meta[k, item, POS] = i


@njit(cache=True, inline="always")
def _sift_up(meta, heap, k, i, item, c, t):
    while i > 0:
        parent = (i - 1) >> 1
        pc = heap[k, parent, H_COUNT]
        pt = heap[k, parent, H_LAST]
        if c < pc or (c == pc and t < pt):
            _heap_set(meta, heap, k, i, heap[k, parent, H_ITEM], pc, pt)
            i = parent
        else:
            break
    _heap_set(meta, heap, k, i, item, c, t)


@njit(cache=True, inline="always")
def _sift_down(meta, heap, n, k, i, item, c, t):
    # ticks are unique within a cache, so (count, tick) is a strict order
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        cc = heap[k, child, H_COUNT]
        ct = heap[k, child, H_LAST]
        right = child + 1
        if right < n:
            rc = heap[k, right, H_COUNT]
            rt = heap[k, right, H_LAST]
            if rc < cc or (rc == cc and rt < ct):
                child = right
                cc = rc
                ct = rt
        if cc < c or (cc == c and ct < t):
            _heap_set(meta, heap, k, i, heap[k, child, H_ITEM], cc, ct)
            i = child
        else:
            break
    _heap_set(meta, heap, k, i, item, c, t)


@njit(cache=True, inline="always")
def _lru_unlink(meta, st, k, item):
    p = meta[k, item, PREV]
    n = meta[k, item, NEXT]
    if p == 0:
        st[k, HEAD] = n
    else:
        meta[k, p, NEXT] = n
    if n == 0:
        st[k, TAIL] = p
    else:
        meta[k, n, PREV] = p


@njit(cache=True, inline="always")
def _lru_push(meta, st, k, item):
    tail = st[k, TAIL]
    meta[k, item, PREV] = tail
    meta[k, item, NEXT] = 0
    if tail == 0:
        st[k, HEAD] = item
    else:
        meta[k, tail, NEXT] = item
    st[k, TAIL] = item


@njit(cache=True, inline="always")
def access(policy, capacity, meta, heap, st, k, item):
    """One request for ``item`` at cache ``k``; returns 1 on a hit."""
    st[k, ADMITTED] = 0
    st[k, EVICTED] = 0
    t = st[k, TICK] + 1
    st[k, TICK] = t
    c = meta[k, item, COUNT] + 1
    meta[k, item, COUNT] = c
    meta[k, item, LAST] = t
    p = meta[k, item, POS]
    if policy == LRU:
        if p >= 0:
            if st[k, TAIL] != item:
                _lru_unlink(meta, st, k, item)
                _lru_push(meta, st, k, item)
            return 1
        if capacity == 0:
            return 0
        if st[k, SIZE] == capacity:
            victim = st[k, HEAD]
            _lru_unlink(meta, st, k, victim)
            meta[k, victim, POS] = -1
            st[k, EVICTED] = victim
        else:
            st[k, SIZE] += 1
        _lru_push(meta, st, k, item)
        meta[k, item, POS] = 1
        st[k, ADMITTED] = item
        return 0
    if p >= 0:
        # key only grows on a hit
        _sift_down(meta, heap, st[k, SIZE], k, p, item, c, t)
        return 1
    if capacity == 0:
        return 0
    n = st[k, SIZE]
    if n < capacity:
        st[k, SIZE] = n + 1
        _sift_up(meta, heap, k, n, item, c, t)
        st[k, ADMITTED] = item
        return 0
    # the newcomer holds the latest tick, so it wins any count tie
    if heap[k, 0, H_COUNT] <= c:
        victim = heap[k, 0, H_ITEM]
        meta[k, victim, POS] = -1
        _sift_down(meta, heap, n, k, 0, item, c, t)
        st[k, ADMITTED] = item
        st[k, EVICTED] = victim
    return 0


@njit(cache=True, inline="always")
def _pick(cdf, row, width, u):
    """First index with ``cdf[row, i] > u``; branch-free halving search."""
    lo = 0
    n = width
    while n > 1:
        half = n >> 1
        if cdf[row, lo + half - 1] <= u:
            lo += half
        n -= half
    return lo


@njit(cache=True)
def pick_many(cdf, row, u):
    out = np.empty(u.shape[0], dtype=np.int64)
    for j in range(u.shape[0]):
        out[j] = _pick(cdf, row, cdf.shape[1], u[j])
    return out


@njit(cache=True)
def replay_trace(policy, capacity, meta, heap, st, k, trace, hits):
    for j in range(trace.shape[0]):
        hits[j] = access(policy, capacity, meta, heap, st, k, trace[j])


@njit(cache=True)
def stabilize_chunk(policy, capacity, meta, heap, st,
                    u_ue, u_item, ue_profile, ue_cache, prof_items, prof_cdf,
                    window, eps, cap, win, prev_chr, flags, phase, unstable):
    """Issue requests until every active cache is stable or capped.

    A cache is stable once two consecutive disjoint windows of ``window`` of
    its own requests differ in hit ratio by less than ``eps``; it then stays
    stable for the rest of the phase. Per cache: ``win`` holds the open
    window's (requests, hits), ``phase`` the phase totals, ``flags`` the
    (has previous window, stable, capped) bits. ``unstable[0]`` counts active
    caches not yet stable. Returns the number of uniforms consumed.
    """
    n_ue = ue_profile.shape[0]
    width = prof_items.shape[1]
    used = 0
    for j in range(u_ue.shape[0]):
        if unstable[0] == 0:
            break
        ue = min(int(u_ue[j] * n_ue), n_ue - 1)
        prof = ue_profile[ue]
        item = prof_items[prof, _pick(prof_cdf, prof, width, u_item[j])]
        k = ue_cache[ue]
        hit = access(policy, capacity, meta, heap, st, k, item)
        used += 1
        phase[k, 0] += 1
        phase[k, 1] += hit
        if flags[k, 1]:
            continue
        win[k, 0] += 1
        win[k, 1] += hit
        if win[k, 0] == window:
            chr_now = win[k, 1] / window
            if flags[k, 0] and abs(chr_now - prev_chr[k]) < eps:
                flags[k, 1] = 1
                unstable[0] -= 1
            prev_chr[k] = chr_now
            flags[k, 0] = 1
            win[k, 0] = 0
            win[k, 1] = 0
        if flags[k, 1] == 0 and phase[k, 0] >= cap:
            flags[k, 1] = 1
            flags[k, 2] = 1
            unstable[0] -= 1
    return used


@njit(cache=True)
def route_chunk(policy, capacity, meta, heap, st,
                u_ue, u_item, u_ap, random_route, ue_profile, prof_items, prof_cdf,
                ap_cache, w, overlap, item_ptr, item_prof, slot_req, chosen, hits):
    """Per-request routing: each request goes to the AP with the best fit.

    ``overlap[p, k]`` is the number of profile ``p``'s items resident in cache
    ``k`` and is kept current on every admission and eviction. The load of
    AP ``a`` is ``1 - slot_req[a] / sum(slot_req)``, or 1 when the slot is
    empty. With ``random_route`` the AP is instead uniform from ``u_ap``.
    ``chosen``/``hits`` receive the AP and hit flag per request.
    """
    n_ue = ue_profile.shape[0]
    width = prof_items.shape[1]
    M = ap_cache.shape[0]
    total = 0
    for a in range(M):
        total += slot_req[a]
    n_hits = 0
    for j in range(u_ue.shape[0]):
        ue = min(int(u_ue[j] * n_ue), n_ue - 1)
        prof = ue_profile[ue]
        item = prof_items[prof, _pick(prof_cdf, prof, width, u_item[j])]
        best = 0
        if random_route:
            best = min(int(u_ap[j] * M), M - 1)
        else:
            best_F = -1.0
            for a in range(M):
                f = overlap[prof, ap_cache[a]] / width
                if total == 0:
                    l = 1.0
                else:
                    l = 1.0 - slot_req[a] / total
                F = w * f + (1.0 - w) * l
                if F > best_F:
                    best_F = F
                    best = a
        k = ap_cache[best]
        hit = access(policy, capacity, meta, heap, st, k, item)
        slot_req[best] += 1
        total += 1
        n_hits += hit
        chosen[j] = best
        hits[j] = hit
        added = st[k, ADMITTED]
        if added != 0:
            for e in range(item_ptr[added], item_ptr[added + 1]):
                overlap[item_prof[e], k] += 1
        gone = st[k, EVICTED]
        if gone != 0:
            for e in range(item_ptr[gone], item_ptr[gone + 1]):
                overlap[item_prof[e], k] -= 1
    return n_hits
