import itertools
import json

import numpy as np
import pytest

from coevo.equilibrium import run_algorithm1
from coevo.network import LayeredNetwork, ModelParams, make_complete, make_family
from coevo.search import (AdmissibilityOracle, SearchConfig, bonacich_centrality, brute_force_minimum,
                          chain_occupancy, chain_step, complete_graph_check_sizes,
                          find_submodularity_violation, greedy_centrality_baseline, is_admissible,
                          merge_results, minimize_control_set, result_json, split_control)
from coevo.seeding import rng_for
from coevo.thresholds import complete_graph_thresholds

from conftest import random_instance

ALL5 = frozenset(range(5))


def test_split_control():
    C = {1, 3}
    assert split_control(C, range(5), range(5)) == (frozenset(C), frozenset(C))
    assert split_control(C, range(5), ()) == (frozenset(C), frozenset())
    assert split_control({1, 2}, {1}, {2}) == ({1}, {2})
    with pytest.raises(ValueError):
        split_control({4}, {1}, {2})


def test_admissibility_examples():
    net = make_complete(5)
    params = ModelParams.homogeneous(5, 0.5, 0.5)
    assert is_admissible(ALL5, ALL5, (), net, params)
    assert not is_admissible((), ALL5, ALL5, net, params)
    assert is_admissible({0, 1, 2}, ALL5, (), net, params)
    assert not is_admissible({0, 1}, ALL5, (), net, params)


def test_oracle_early_exit_agrees(rng):
    for _ in range(20):
        net, params = random_instance(rng, int(rng.integers(4, 9)))
        n = net.n
        VX = frozenset(range(n))
        VY = frozenset(np.flatnonzero(rng.random(n) < 0.5).tolist())
        fast = AdmissibilityOracle(net, params, VX, VY)
        full = fast.full_mask
        for r in range(n):
            D = full & ~(1 << r)
            expect = run_algorithm1(net, params, *split_control({i for i in range(n) if D >> i & 1}, VX, VY)).phi
            assert fast.check_mask(D, known_superset=full) == bool(expect)


def test_chain_step_frequencies():
    """One-step move frequencies from a fixed set match the transition law within 3 sigma."""
    rng = np.random.default_rng(7)
    net, params = random_instance(rng, 4)
    VX, VY = frozenset(range(4)), frozenset({0, 2})
    oracle = AdmissibilityOracle(net, params, VX, VY)
    admissible = [frozenset(c) for k in range(5) for c in itertools.combinations(range(4), k) if oracle(c)]
    C = min(admissible, key=lambda c: (abs(len(c) - 2), sorted(c)))
    eps, N = 0.3, 1_000_000
    expect = {}
    for r in oracle.vstar:
        if r in C:
            nxt = C - {r} if oracle(C - {r}) else C
            expect[nxt] = expect.get(nxt, 0) + 1 / 4
        else:
            expect[C | {r}] = expect.get(C | {r}, 0) + eps / 4
            expect[C] = expect.get(C, 0) + (1 - eps) / 4
    counts = {}
    g = rng_for(1, "test-chain")
    for _ in range(N):
        nxt, _ = chain_step(C, oracle, eps, g)
        counts[nxt] = counts.get(nxt, 0) + 1
    assert set(counts) <= set(expect)
    for state, p in expect.items():
        sigma = np.sqrt(N * p * (1 - p))
        assert abs(counts.get(state, 0) - N * p) <= 3 * sigma, (state, counts.get(state), N * p)


def test_chain_from_full_only_removes():
    net = make_complete(5)
    params = ModelParams.homogeneous(5, 0.5, 0.5)
    oracle = AdmissibilityOracle(net, params, ALL5, ALL5)
    g = np.random.default_rng(0)
    assert {chain_step(ALL5, oracle, 0.9, g)[1] for _ in range(200)} == {"remove"}


def test_chain_holds_on_minimal_members():
    net = make_complete(5)
    params = ModelParams.homogeneous(5, 0.5, 0.5)
    oracle = AdmissibilityOracle(net, params, ALL5, ())
    C = frozenset({0, 1, 2})
    g = np.random.default_rng(0)
    for _ in range(200):
        nxt, move = chain_step(C, oracle, 0.5, g)
        assert move in ("hold", "insert")
        assert nxt >= C


def test_minimize_complete_joint():
    net = make_complete(5)
    params = ModelParams.homogeneous(5, 0.5, 0.5)
    res = minimize_control_set(net, params, ALL5, ALL5, SearchConfig(0.1, 10_000, seed=3))
    assert res.size == complete_graph_thresholds(0.5, 0.5, 5, "joint").min_size
    assert res.size == complete_graph_check_sizes(5, 0.5, 0.5, "joint")
    assert res.CX == res.best and res.CY == res.best


def test_minimize_infeasible():
    net = make_complete(5)
    params = ModelParams.homogeneous(5, 0.5, 0.5)
    res = minimize_control_set(net, params, (), {0}, SearchConfig(0.1, 1000))
    assert not res.feasible and res.trace is None and res.best is None
    assert json.loads(result_json(res))["result"] == "infeasible"


def test_trace_invariants(rng):
    net, params = random_instance(rng, 8)
    VX, VY = range(8), range(0, 8, 2)
    res = minimize_control_set(net, params, VX, VY, SearchConfig(0.3, 3000, seed=11))
    tr = res.trace
    assert np.all(np.diff(tr.best_size) <= 0)
    steps = np.diff(np.concatenate([[8], tr.current_size]))
    assert np.array_equal(steps, np.select([tr.move == 1, tr.move == 2], [-1, 1], 0))
    assert is_admissible(res.best, VX, VY, net, params)
    assert is_admissible(res.final, VX, VY, net, params)
    assert tr.best_size[-1] == res.size
    assert tr.to_csv().splitlines()[0] == "iter,current_size,best_size,move"


def test_minimize_deterministic(rng):
    net, params = random_instance(rng, 7)
    cfg = SearchConfig(0.2, 2000, seed=5)
    a = minimize_control_set(net, params, range(7), range(7), cfg)
    b = minimize_control_set(net, params, range(7), range(7), cfg)
    assert a.best == b.best and np.array_equal(a.trace.move, b.trace.move)


def test_minimize_never_beats_brute_force(rng):
    for s in range(5):
        net, params = random_instance(rng, int(rng.integers(4, 9)))
        n = net.n
        opt = brute_force_minimum(net, params, range(n), range(n))
        res = minimize_control_set(net, params, range(n), range(n), SearchConfig(0.1, 3000, seed=s))
        assert res.size >= len(opt[0])


def test_occupancy_walk_follows_same_chain(rng):
    net, params = random_instance(rng, 6)
    oracle = AdmissibilityOracle(net, params, range(6), range(6))
    res = minimize_control_set(net, params, range(6), range(6), SearchConfig(0.2, 5000, seed=4))
    occ = chain_occupancy(oracle, 0.2, 5000, 4)
    assert occ.final == res.final
    assert occ.visits.sum() == 5000


def test_decay_and_config_checks():
    assert SearchConfig(0.5, decay=0.5).epsilon_at(2) == 0.125
    for bad in (dict(epsilon=0.0), dict(epsilon=1.5), dict(max_iters=-1), dict(decay=0.0)):
        with pytest.raises(ValueError):
            SearchConfig(**bad)


def test_merge_prefers_smaller_then_lexicographic():
    net = make_complete(5)
    params = ModelParams.homogeneous(5, 0.5, 0.5)
    rs = [minimize_control_set(net, params, ALL5, ALL5, SearchConfig(0.1, 2000, seed=s), chain=s)
          for s in range(4)]
    best = merge_results(rs)
    assert best.size == min(r.size for r in rs)
    assert sorted(best.best) == min(sorted(r.best) for r in rs if r.size == best.size)


def test_brute_force_action_complete():
    net = make_complete(5)
    params = ModelParams.homogeneous(5, 0.5, 0.5)
    found = brute_force_minimum(net, params, ALL5, ())
    assert {len(c) for c in found} == {3} and len(found) == 10


def test_brute_force_only_full_set():
    M = np.array([[0.9, 0.1], [0.1, 0.9]])
    net = LayeredNetwork(M, M)
    params = ModelParams.homogeneous(2, 0.5, 0.5)
    assert brute_force_minimum(net, params, range(2), range(2)) == [frozenset(range(2))]


def test_brute_force_cap():
    net, params = make_complete(5), ModelParams.homogeneous(5, 0.5, 0.5)
    assert brute_force_minimum(net, params, ALL5, (), cardinality_cap=2) == []
    with pytest.raises(ValueError):
        brute_force_minimum(make_complete(22), ModelParams.homogeneous(22, .5, .5), range(22), ())


def test_two_node_table():
    """Exhaustive phi over all (CX, CY) pairs of the two-node mutual-influence network."""
    M = np.array([[2 / 3, 1 / 3], [1 / 3, 2 / 3]])
    net = LayeredNetwork(M, M)
    lam, beta = 2 / 3, 1 / 2
    params = ModelParams.homogeneous(2, lam, beta)
    subsets = [frozenset(s) for k in range(3) for s in itertools.combinations(range(2), k)]
    table = {(X, Y): run_algorithm1(net, params, X, Y).phi for X in subsets for Y in subsets}
    assert table[(frozenset(), frozenset())] == 0
    for (X, Y), v in table.items():
        for (X2, Y2), v2 in table.items():
            if X <= X2 and Y <= Y2:
                assert v <= v2
    # all opinions pinned, only node 0's action: the free node's score is
    # 2 beta (1 - lam) - (1 - beta) / 3 = 1/6 > 0, so a single action suffices
    d2 = 2 * beta * (1 - lam) * (M[1] @ [1, 1]) + (1 - beta) * (M[1] @ [1, -1])
    assert d2 == pytest.approx(2 * beta * (1 - lam) - (1 - beta) / 3)
    assert table[(frozenset({0}), frozenset({0, 1}))] == 1
    assert table[(frozenset({1}), frozenset({0, 1}))] == 1


def test_bonacich():
    star = make_family("star", 6)
    res = greedy_centrality_baseline(star, ModelParams.homogeneous(6, 0.5, 0.5), range(6), range(6))
    assert res.ranking[0] == 0
    with pytest.raises(ValueError):
        bonacich_centrality(star.A, 1.0)


@pytest.mark.parametrize("scenario", ["action", "joint", "opinion"])
def test_greedy_on_complete_matches_closed_form(scenario):
    n, lam, beta = 9, 0.4, 0.8
    net = make_complete(n)
    VX = range(n) if scenario != "opinion" else ()
    VY = range(n) if scenario != "action" else ()
    res = greedy_centrality_baseline(net, ModelParams.homogeneous(n, lam, beta), VX, VY)
    assert res.ranking == tuple(range(n))
    assert res.size == complete_graph_thresholds(lam, beta, n, scenario).min_size


def test_greedy_infeasible():
    net = make_complete(4)
    res = greedy_centrality_baseline(net, ModelParams.homogeneous(4, 0.5, 0.5), (), {0})
    assert not res.feasible and res.to_dict()["result"] == "infeasible"


@pytest.mark.parametrize("variable", ["x", "y"])
def test_submodularity_witness(variable):
    w = find_submodularity_violation(variable)
    assert w is not None
    M = np.array([[w.self_weight, 1 - w.self_weight], [1 - w.self_weight, w.self_weight]])
    net = LayeredNetwork(M, M)
    params = ModelParams.homogeneous(2, w.lam, w.beta)

    def f(Z):
        return run_algorithm1(net, params, *((Z, w.fixed) if variable == "x" else (w.fixed, Z))).phi

    got = (f(w.S), f(w.T), f(w.S | w.T), f(w.S & w.T))
    assert got == w.phis
    assert got[0] + got[1] < got[2] + got[3]
