import copy
from dataclasses import replace

import numpy as np
import pytest

from iccon import _kernels as K
from iccon.caching import LfuCache, replay
from iccon.errors import ConfigError
from iccon.matching import select_ap
from iccon.simulator import (
    PerRequestWorld,
    SimConfig,
    World,
    cache_groups,
    churn_step,
    make_world,
    measure_chr,
    run_churn_scenario,
    run_per_request_scenario,
    run_warmup,
)

SMALL = SimConfig(N=30, M=3, C=400, c=20, U=5, u=60, seed=3)


def test_measure_chr_examples():
    assert measure_chr(0, 10) == 0.0
    assert measure_chr(10, 10) == 1.0
    assert measure_chr(39, 100) == pytest.approx(0.39)
    assert measure_chr(0, 0) is None


@pytest.mark.parametrize("field, value", [
    ("N", 2), ("M", 0), ("c", 400), ("c", 0), ("u", 401), ("w", 1.5),
    ("policy", "greedy"), ("cache_policy", "fifo"), ("topology", ("a",)), ("lambda_c", 0.0),
])
def test_config_validation(field, value):
    with pytest.raises(ConfigError) as err:
        replace(SMALL, **{field: value}).validate()
    assert err.value.key == field


def test_population_split():
    assert SimConfig().population == 50
    assert SimConfig().churn_steps == 100
    assert SimConfig(N=3).population == 1


def test_single_item_profile_stabilizes_to_full_hits():
    cfg = SimConfig(N=3, M=1, C=10, c=2, U=1, u=1, seed=0)
    world, requests, hits, capped = run_warmup(cfg)
    assert not capped
    assert requests >= 2 * cfg.window
    # one cold miss, everything after hits
    assert hits == requests - 1


def test_cache_larger_than_requestable_set_reaches_full_hits():
    cfg = SimConfig(N=9, M=1, C=100, c=30, U=2, u=10, seed=1)
    world, _, _, capped = run_warmup(cfg)
    assert not capped
    _, requests, hits, _ = churn_step(world, "iccon")
    assert hits / requests > 0.99


def test_warmup_fills_caches():
    world, requests, hits, _ = run_warmup(SMALL)
    assert 0 < hits / requests < 1
    assert all(len(world.bank.resident(k)) == SMALL.c for k in range(world.bank.K))


def test_random_policy_single_ap():
    world = make_world(replace(SMALL, M=1, policy="random"))
    for _ in range(5):
        ap, *_ = churn_step(world, "random")
        assert ap == 0


def test_iccon_picks_cache_holding_whole_profile():
    cfg = replace(SMALL, c=60, U=2)
    world = World(cfg)
    profile = 1
    items = world.profiles[profile].items
    trace = np.concatenate([items, items]).astype(np.int64)
    K.replay_trace(*world.bank.arrays(), 2, trace, np.zeros(len(trace), dtype=np.int64))
    assert world.choose_ap(profile, "iccon") == 2


def test_churn_boundary_population():
    series = run_churn_scenario(replace(SMALL, N=3))
    assert len(series.rows) == 2
    assert [r.event_index for r in series.rows] == [1, 2]


def test_conservation_during_churn():
    world, *_ = run_warmup(SMALL)
    for _ in range(SMALL.churn_steps):
        _, requests, hits, _ = churn_step(world, "iccon")
        assert world.ap_n.sum() == len(world.ues) == SMALL.population
        assert 0 <= hits <= requests
        assert all(n >= 0 for n in world.ap_n)


def test_churn_rows_are_consistent():
    series = run_churn_scenario(SMALL, "random")
    req = hit = 0
    for row in series.rows:
        req += row.requests
        hit += row.hits
        assert row.chr_window == pytest.approx(row.hits / row.requests)
        assert row.chr_cumulative == pytest.approx(hit / req)
        assert sum(row.per_ap_n) == SMALL.population


def test_churn_is_deterministic():
    a = run_churn_scenario(SMALL)
    b = run_churn_scenario(SMALL)
    assert a == b
    c = run_churn_scenario(replace(SMALL, seed=4))
    assert a.chr_values().tolist() != c.chr_values().tolist()


def test_hit_ratio_bounded_by_top_c_mass():
    cfg = replace(SMALL, M=2, N=24)
    world, *_ = run_warmup(cfg)
    _, requests, hits, _ = churn_step(world, "random")
    # every attached UE requests equally often; each cache sees a profile mixture
    bound = 0.0
    n_ue = len(world.ues)
    for k in range(world.bank.K):
        ues = [ue for ue in world.ues if world.ap_cache[ue.attached_ap] == k]
        if not ues:
            continue
        mix = np.zeros(cfg.C + 1)
        for ue in ues:
            p = world.profiles[ue.profile]
            mix[p.items] += p.weights / len(ues)
        bound += len(ues) / n_ue * np.sort(mix)[::-1][: cfg.c].sum()
    assert hits / requests <= bound + 0.01


def test_cache_groups():
    assert cache_groups(SMALL).tolist() == [0, 1, 2]
    assert cache_groups(replace(SMALL, topology=("x", "y", "x"))).tolist() == [0, 1, 0]


def test_shared_topology_shares_index_and_counts():
    cfg = replace(SMALL, topology=("a", "a", "b"))
    world, *_ = run_warmup(cfg)
    assert world.bank.K == 2
    idx = world.indexes()
    assert idx[0] is idx[1] and idx[0] is not idx[2]
    series = run_churn_scenario(cfg)
    assert len(series.rows) == cfg.churn_steps


def replay_requests(config, slots, per_slot):
    """Rebuild the per-request item trace from the documented stream layout."""
    pr = PerRequestWorld(config)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(5)[3])
    n_ue = len(pr.ue_profile)
    items = []
    for _ in range(slots):
        u_ue = rng.random(per_slot)
        u_item = rng.random(per_slot)
        ue = np.minimum((u_ue * n_ue).astype(np.int64), n_ue - 1)
        prof = pr.ue_profile[ue]
        for p, u in zip(prof, u_item):
            col = np.searchsorted(pr.world.prof_cdf[p], u, side="right")
            items.append(int(pr.world.prof_items[p, col]))
    return items


def test_per_request_single_ap_equals_single_lfu():
    cfg = replace(SMALL, M=1)
    series = run_per_request_scenario(cfg, slots=3, requests_per_slot=5000)
    hits = replay(LfuCache(cfg.c), replay_requests(cfg, 3, 5000))
    per_slot = [sum(hits[i * 5000:(i + 1) * 5000]) for i in range(3)]
    assert [r.hits for r in series.rows] == per_slot


def test_per_request_routing_matches_select_ap():
    cfg = replace(SMALL, M=4, topology=("a", "b", "a", "c"))
    pr = PerRequestWorld(cfg)
    w = pr.world
    slot_req = np.zeros(cfg.M, dtype=np.int64)
    for _ in range(400):
        peek = copy.deepcopy(w.request_rng)
        ue = min(int(peek.random() * len(pr.ue_profile)), len(pr.ue_profile) - 1)
        profile = w.profiles[pr.ue_profile[ue]]
        expected = select_ap(profile, w.indexes(), slot_req.tolist(), cfg.w).ap
        chosen, _ = pr.run_requests(1, slot_req)
        assert chosen[0] == expected
    for p in range(cfg.U):
        for k in range(w.bank.K):
            resident = set(w.bank.resident(k).tolist())
            assert pr.overlap[p, k] == len(resident & w.profiles[p].item_set)


def test_per_request_conservation_and_determinism():
    a = run_per_request_scenario(SMALL, slots=3, requests_per_slot=3000)
    b = run_per_request_scenario(SMALL, slots=3, requests_per_slot=3000)
    assert a == b
    for row in a.rows:
        assert row.requests == 3000 and 0 <= row.hits <= 3000


def test_content_blind_routing_matches_random():
    cfg = SimConfig(N=60, M=4, C=2000, c=100, U=10, u=200, w=0.0)
    diffs = []
    for seed in range(1, 6):
        c = replace(cfg, seed=seed)
        blind = run_per_request_scenario(c, slots=5, requests_per_slot=20_000)
        rand = run_per_request_scenario(c, slots=5, requests_per_slot=20_000, policy="random")
        diffs.append(blind.rows[-1].chr - rand.rows[-1].chr)
    assert abs(np.mean(diffs)) <= 0.03

