"""Churn and per-request AP selection experiments.

A world holds ``M`` APs backed by LFU or LRU caches (one per AP, or shared
by groups of APs), a Zipf catalogue and a fixed set of UE profiles. Requests
form a merged Poisson stream: the next requester is uniform among attached
UEs and draws an item from its own profile. Only the order of events affects
cache state, so simulated wall-clock time is not tracked.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .caching import CacheIndex
from .catalogue import build_catalogue, generate_profiles, profile_assignment_law, sample_item
from .errors import ConfigError
from .matching import select_ap

log = logging.getLogger(__name__)

CHUNK = 1 << 16
POLICIES = ("iccon", "random")
CACHE_POLICIES = ("lfu", "lru")


@dataclass(frozen=True)
class SimConfig:
    """Experiment parameters; ``c`` and ``u`` are item counts.

    ``topology`` maps each AP to a cache group label; ``None`` gives every AP
    its own cache.
    """

    N: int = 150
    M: int = 10
    C: int = 10_000
    c: int = 500
    s: float = 0.8
    lambda_c: float = 0.01
    lambda_v: float = 0.003
    U: int = 50
    u: int = 1000
    w: float = 0.65
    policy: str = "iccon"
    cache_policy: str = "lfu"
    topology: tuple | None = None
    seed: int = 1
    stab_window_mult: float = 10.0
    stab_eps: float = 0.005
    stab_cap_mult: float = 100.0
    slots: int = 50
    requests_per_slot: int = 100_000

    def validate(self):
        def bad(key, msg):
            raise ConfigError(msg, key=key)

        if self.N < 3:
            bad("N", f"N must be >= 3, got {self.N}")
        if self.M < 1:
            bad("M", f"M must be >= 1, got {self.M}")
        if self.C < 2:
            bad("C", f"C must be >= 2, got {self.C}")
        if not 0 < self.c < self.C:
            bad("c", f"cache size must satisfy 0 < c < C, got c={self.c}, C={self.C}")
        if not self.s >= 0:
            bad("s", f"Zipf slope must be >= 0, got {self.s}")
        if not self.lambda_c > 0:
            bad("lambda_c", "lambda_c must be positive")
        if not self.lambda_v > 0:
            bad("lambda_v", "lambda_v must be positive")
        if self.U < 1:
            bad("U", f"U must be >= 1, got {self.U}")
        if not 1 <= self.u <= self.C:
            bad("u", f"profile size must satisfy 1 <= u <= C, got {self.u}")
        if not 0.0 <= self.w <= 1.0:
            bad("w", f"w must lie in [0, 1], got {self.w}")
        if self.policy not in POLICIES:
            bad("policy", f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.cache_policy not in CACHE_POLICIES:
            bad("cache_policy", f"cache_policy must be one of {CACHE_POLICIES}")
        if self.topology is not None and len(self.topology) != self.M:
            bad("topology", f"topology needs one cache label per AP ({self.M})")
        if not 0 <= self.seed < 2**64:
            bad("seed", "seed must be a 64-bit unsigned integer")
        if self.stab_window_mult <= 0 or self.stab_cap_mult <= 0 or self.stab_eps <= 0:
            bad("stab_window_mult", "stabilization parameters must be positive")
        if self.slots < 1 or self.requests_per_slot < 1:
            bad("slots", "slots and requests_per_slot must be >= 1")
        return self

    @property
    def population(self):
        return self.N // 3

    @property
    def churn_steps(self):
        return 2 * self.N // 3

    @property
    def window(self):
        return max(1, int(self.stab_window_mult * self.c))

    @property
    def cap(self):
        return max(1, int(self.stab_cap_mult * self.c))


@dataclass
class UeState:
    id: int
    profile: int
    attached_ap: int | None
    arrival_order: int


@dataclass
class ChurnRow:
    event_index: int
    requests: int
    hits: int
    chr_window: float | None
    chr_cumulative: float | None
    per_ap_n: tuple
    capped: bool = False


@dataclass
class SlotRow:
    slot: int
    requests: int
    hits: int
    chr: float | None


@dataclass
class MetricsSeries:
    scenario: str
    policy: str
    seed: int
    rows: list = field(default_factory=list)
    warmup_requests: int = 0
    warmup_hits: int = 0
    warmup_capped: bool = False

    def chr_values(self):
        attr = "chr_window" if self.scenario == "churn" else "chr"
        return np.array([getattr(r, attr) for r in self.rows], dtype=float)


def measure_chr(hits, requests):
    """``hits / requests``; ``None`` when nothing was requested."""
    if requests == 0:
        return None
    return hits / requests


def cache_groups(config):
    """Map each AP to a dense cache number in order of first appearance."""
    if config.topology is None:
        return np.arange(config.M, dtype=np.int64)
    labels = {}
    return np.array([labels.setdefault(t, len(labels)) for t in config.topology], dtype=np.int64)


class World:
    """Mutable state of one replica: caches, attached UEs and random streams."""

    def __init__(self, config):
        self.config = config.validate()
        streams = np.random.SeedSequence(config.seed).spawn(5)
        self.profile_rng, self.assign_rng, self.attach_rng, self.request_rng, self.route_rng = (
            np.random.default_rng(s) for s in streams
        )
        self.catalogue = build_catalogue(config.C, config.s)
        self.profiles = generate_profiles(self.catalogue, config.U, config.u, self.profile_rng)
        self.prof_items = np.stack([p.items for p in self.profiles]).astype(np.int64)
        self.prof_cdf = np.stack([p.cdf for p in self.profiles])
        self.assignment = profile_assignment_law(config.U, config.s)
        self.ap_cache = cache_groups(config)
        n_caches = int(self.ap_cache.max()) + 1
        policy = K.LFU if config.cache_policy == "lfu" else K.LRU
        self.bank = K.CacheBank(n_caches, config.c, config.C, policy)
        self.ues = deque()
        self.ap_n = np.zeros(config.M, dtype=np.int64)
        self._next_id = 0

    def assign_profile(self):
        return sample_item(self.assignment, self.assign_rng) - 1

    def attach(self, profile, ap):
        ue = UeState(self._next_id, profile, ap, self._next_id)
        self._next_id += 1
        self.ues.append(ue)
        self.ap_n[ap] += 1
        return ue

    def depart_oldest(self):
        ue = self.ues.popleft()
        self.ap_n[ue.attached_ap] -= 1
        ue.attached_ap = None
        return ue

    def indexes(self):
        """Cache index per AP; APs on a shared cache get the same object."""
        snapshots = [
            CacheIndex(frozenset(self.bank.resident(k).tolist()), int(self.bank.tick[k]))
            for k in range(self.bank.K)
        ]
        return [snapshots[k] for k in self.ap_cache]

    def choose_ap(self, profile, policy):
        if policy == "random":
            return int(self.attach_rng.integers(self.config.M))
        best = select_ap(self.profiles[profile], self.indexes(), self.ap_n.tolist(), self.config.w)
        return best.ap

    def stabilize(self):
        """Run requests until every cache with attached UEs is stable.

        Returns ``(requests, hits, capped)`` for the phase.
        """
        cfg = self.config
        n_k = self.bank.K
        if not self.ues:
            return 0, 0, False
        ue_profile = np.array([ue.profile for ue in self.ues], dtype=np.int64)
        ue_cache = self.ap_cache[np.array([ue.attached_ap for ue in self.ues])]
        active = np.zeros(n_k, dtype=bool)
        active[ue_cache] = True
        win = np.zeros((n_k, 2), dtype=np.int64)
        phase = np.zeros((n_k, 2), dtype=np.int64)
        prev_chr = np.zeros(n_k)
        # per cache: has previous window, stable, capped
        flags = np.zeros((n_k, 3), dtype=np.int64)
        flags[~active, 1] = 1
        unstable = np.array([active.sum()], dtype=np.int64)
        while unstable[0] > 0:
            u_ue = self.request_rng.random(CHUNK)
            u_item = self.request_rng.random(CHUNK)
            K.stabilize_chunk(
                *self.bank.arrays(), u_ue, u_item, ue_profile, ue_cache,
                self.prof_items, self.prof_cdf, cfg.window, cfg.stab_eps, cfg.cap,
                win, prev_chr, flags, phase, unstable,
            )
        return int(phase[:, 0].sum()), int(phase[:, 1].sum()), bool(flags[:, 2].any())


def make_world(config):
    """World with ``floor(N/3)`` UEs attached to uniformly random APs."""
    world = World(config)
    for _ in range(config.population):
        profile = world.assign_profile()
        world.attach(profile, int(world.attach_rng.integers(config.M)))
    return world


def run_warmup(config, world=None):
    """Let the initial population fill the caches. Returns ``(world, requests, hits, capped)``."""
    if world is None:
        world = make_world(config)
    requests, hits, capped = world.stabilize()
    if capped:
        log.warning("warm-up hit the request cap (seed %d)", config.seed)
    return world, requests, hits, capped


def churn_step(world, policy):
    """FIFO departure, one arrival placed by ``policy``, then stabilization.

    Returns ``(ap, requests, hits, capped)``.
    """
    world.depart_oldest()
    profile = world.assign_profile()
    ap = world.choose_ap(profile, policy)
    world.attach(profile, ap)
    requests, hits, capped = world.stabilize()
    return ap, requests, hits, capped


def run_churn_scenario(config, policy=None):
    """Warm-up then ``floor(2N/3)`` churn steps; one row per step."""
    policy = policy or config.policy
    if policy not in POLICIES:
        raise ConfigError(f"policy must be one of {POLICIES}, got {policy!r}", key="policy")
    config = replace(config, policy=policy)
    world, w_req, w_hit, w_capped = run_warmup(config)
    series = MetricsSeries("churn", policy, config.seed, warmup_requests=w_req,
                           warmup_hits=w_hit, warmup_capped=w_capped)
    total_req = total_hit = 0
    for step in range(1, config.churn_steps + 1):
        _, requests, hits, capped = churn_step(world, policy)
        total_req += requests
        total_hit += hits
        series.rows.append(ChurnRow(
            event_index=step,
            requests=requests,
            hits=hits,
            chr_window=measure_chr(hits, requests),
            chr_cumulative=measure_chr(total_hit, total_req),
            per_ap_n=tuple(int(n) for n in world.ap_n),
            capped=capped,
        ))
    return series


class PerRequestWorld:
    """Fixed population whose every request is routed to the best-fit AP."""

    def __init__(self, config):
        self.world = World(config)
        self.config = config
        w = self.world
        self.ue_profile = np.array(
            [w.assign_profile() for _ in range(config.population)], dtype=np.int64
        )
        self.overlap = np.zeros((config.U, w.bank.K), dtype=np.int64)
        # item -> profiles containing it, CSR layout
        flat_items = w.prof_items.ravel()
        flat_prof = np.repeat(np.arange(config.U, dtype=np.int64), config.u)
        order = np.argsort(flat_items, kind="stable")
        self.item_prof = flat_prof[order]
        counts = np.bincount(flat_items, minlength=config.C + 1)
        self.item_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    def run_requests(self, n, slot_req):
        """Route ``n`` requests; returns ``(chosen_ap, hit)`` arrays."""
        cfg = self.config
        w = self.world
        chosen = np.zeros(n, dtype=np.int64)
        hits = np.zeros(n, dtype=np.int64)
        done = 0
        while done < n:
            m = min(CHUNK, n - done)
            u_ue = w.request_rng.random(m)
            u_item = w.request_rng.random(m)
            u_ap = w.route_rng.random(m)
            K.route_chunk(
                *w.bank.arrays(), u_ue, u_item, u_ap, cfg.policy == "random",
                self.ue_profile, w.prof_items, w.prof_cdf, w.ap_cache, cfg.w,
                self.overlap, self.item_ptr, self.item_prof, slot_req,
                chosen[done:done + m], hits[done:done + m],
            )
            done += m
        return chosen, hits


def run_per_request_scenario(config, slots=None, requests_per_slot=None, policy=None):
    """Route every request independently; one row per slot."""
    config = config.validate()
    if policy is not None:
        config = replace(config, policy=policy).validate()
    slots = config.slots if slots is None else slots
    per_slot = config.requests_per_slot if requests_per_slot is None else requests_per_slot
    pr = PerRequestWorld(config)
    series = MetricsSeries("per-request", config.policy, config.seed)
    for slot in range(1, slots + 1):
        slot_req = np.zeros(config.M, dtype=np.int64)
        _, hits = pr.run_requests(per_slot, slot_req)
        h = int(hits.sum())
        series.rows.append(SlotRow(slot, per_slot, h, measure_chr(h, per_slot)))
    return series
