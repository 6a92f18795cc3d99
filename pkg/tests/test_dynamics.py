import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coevo.dynamics import (ActivationSchedule, ControlSets, PopulationState, apply_control,
                            best_response, delta, increasing_differences_gap, initial_state,
                            simulate, step, utility)
from coevo.network import LayeredNetwork, ModelParams, make_complete, make_family

from conftest import random_instance

PAIR = LayeredNetwork([[0, 1], [1, 0]], [[0, 1], [1, 0]])
HALF2 = ModelParams.homogeneous(2, 0.5, 0.5)


def test_utility_at_consensus(rng):
    net, params = random_instance(rng, 6)
    for v in (1, -1):
        s = PopulationState.consensus(6, v)
        for i in range(6):
            expect = 2 * params.lam[i] * (1 - params.beta[i])
            assert utility(i, (v, float(v)), s, net, params) == pytest.approx(expect, abs=1e-12)


def test_utility_hand_computed():
    s = PopulationState([1, -1], [0.0, 0.0])
    assert utility(0, (1, 0.0), s, PAIR, HALF2) == pytest.approx(-0.25)


def test_utility_rejects_bad_choice():
    with pytest.raises(ValueError):
        utility(0, (0, 0.0), PopulationState.consensus(2), PAIR, HALF2)


def test_delta_signs(rng):
    net, params = random_instance(rng, 5)
    scale = 2 * params.beta * (1 - params.lam) + (1 - params.beta)
    for i in range(5):
        assert delta(i, PopulationState.consensus(5, -1), net, params) == pytest.approx(-scale[i])
        assert delta(i, PopulationState.consensus(5, 1), net, params) == pytest.approx(scale[i])


def test_tie_keeps_action():
    net = make_complete(3)
    params = ModelParams.homogeneous(3, 0.5, 0.5)
    s = PopulationState([1, -1, -1], [1.0, -1.0, -1.0])
    assert delta(2, s, net, params) == 0.0
    assert best_response(2, s, ControlSets(), net, params)[0] == -1
    s_up = PopulationState([1, -1, 1], [1.0, -1.0, -1.0])
    assert best_response(2, s_up, ControlSets(), net, params)[0] == 1


def test_consensus_is_fixed_and_control_forces_plus(rng):
    net, params = random_instance(rng, 4)
    s = PopulationState.consensus(4, -1)
    assert best_response(1, s, ControlSets(), net, params) == (-1, -1.0)
    assert best_response(1, s, ControlSets({1}, {1}), net, params) == (1, 1.0)


def test_apply_control_initial_condition():
    s = initial_state(7, ControlSets({1, 6}, {1, 2}))
    assert s.x.tolist() == [-1, 1, -1, -1, -1, -1, 1]
    assert s.y.tolist() == [-1, 1, 1, -1, -1, -1, -1]
    assert np.all(initial_state(7, ControlSets(range(7), range(7))).y == 1)
    base = PopulationState([1, -1], [0.3, -0.2])
    same = apply_control(base, ControlSets())
    assert np.array_equal(same.x, base.x) and np.array_equal(same.y, base.y)


def test_step_empty_and_hand_example():
    net = make_complete(3)
    params = ModelParams.homogeneous(3, 0.5, 0.5)
    control = ControlSets({0, 1}, {0, 1})
    s = initial_state(3, control)
    same = step(s, [], control, net, params)
    assert same.t == 1 and np.array_equal(same.x, s.x) and np.array_equal(same.y, s.y)
    assert delta(2, s, net, params) == pytest.approx(1.0)
    nxt = step(s, [2], control, net, params)
    assert nxt.x[2] == 1 and nxt.y[2] == pytest.approx(0.5 * 1 + 0.5 * 1)


def test_synchronous_step_is_monotone(rng):
    for _ in range(20):
        net, params = random_instance(rng)
        n = net.n
        control = ControlSets(rng.choice(n, 2, replace=False), rng.choice(n, 1))
        s = initial_state(n, control)
        for _ in range(10):
            nxt = step(s, range(n), control, net, params)
            assert np.all(nxt.x >= s.x) and np.all(nxt.y >= s.y - 1e-12)
            s = nxt


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_best_response_maximizes_utility(seed):
    rng = np.random.default_rng(seed)
    net, params = random_instance(rng, int(rng.integers(2, 7)))
    n = net.n
    s = PopulationState(rng.choice([-1, 1], n), rng.uniform(-1, 1, n))
    i = int(rng.integers(n))
    a, o = best_response(i, s, ControlSets(), net, params)
    assert -1.0 <= o <= 1.0
    best = max(utility(i, (x, float(y)), s, net, params)
               for x in (-1, 1) for y in np.linspace(-1, 1, 2001))
    assert utility(i, (a, o), s, net, params) >= best - 1e-9


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_increasing_differences(seed):
    rng = np.random.default_rng(seed)
    net, params = random_instance(rng, int(rng.integers(2, 7)))
    n = net.n
    xl = rng.choice([-1, 1], n)
    yl = rng.uniform(-1, 1, n)
    xh = np.maximum(xl, rng.choice([-1, 1], n))
    yh = np.minimum(1.0, yl + rng.uniform(0, 1, n))
    i = int(rng.integers(n))
    zl = (int(rng.choice([-1, 1])), float(rng.uniform(-1, 1)))
    zh = (max(zl[0], int(rng.choice([-1, 1]))), float(rng.uniform(zl[1], 1)))
    gap = increasing_differences_gap(i, zh, zl, PopulationState(xh, yh), PopulationState(xl, yl), net, params)
    assert gap >= -1e-12


def test_increasing_differences_degenerate(rng):
    net, params = random_instance(rng, 4)
    s = PopulationState(rng.choice([-1, 1], 4), rng.uniform(-1, 1, 4))
    assert increasing_differences_gap(0, (1, 0.5), (-1, 0.0), s, s, net, params) == pytest.approx(0, abs=1e-12)
    lo = PopulationState.consensus(4, -1)
    assert increasing_differences_gap(0, (1, 0.2), (1, 0.2), s, lo, net, params) == 0
    with pytest.raises(ValueError):
        increasing_differences_gap(0, (-1, 0.0), (1, 0.0), s, s, net, params)


@pytest.mark.parametrize("sched", [
    ActivationSchedule("synchronous"), ActivationSchedule("round_robin"),
    ActivationSchedule("uniform_random_single"), ActivationSchedule("uniform_random_single", window=9),
    ActivationSchedule("uniform_random_subset", k=3),
    ActivationSchedule("explicit", sequence=((0, 1), (2,), (3, 4, 5, 6, 7, 8))),
])
def test_schedule_window_coverage(sched):
    n = 9
    stream = sched.stream(n, seed=5)
    T = stream.T
    indptr, idx = stream.block(10 * T)
    sets = [set(idx[indptr[t]:indptr[t + 1]].tolist()) for t in range(10 * T)]
    for t0 in range(10 * T - T + 1):
        assert set().union(*sets[t0:t0 + T]) == set(range(n))


def test_schedule_validation():
    with pytest.raises(ValueError):
        ActivationSchedule("bogus")
    with pytest.raises(ValueError):
        ActivationSchedule("uniform_random_single", window=3).window_for(5)
    with pytest.raises(ValueError):
        ActivationSchedule("explicit", sequence=((0,),)).window_for(2)


def test_full_control_constant_and_no_control_constant():
    net = make_complete(4)
    params = ModelParams.homogeneous(4, 0.3, 0.6)
    tr = simulate(net, params, ControlSets(range(4), range(4)), ActivationSchedule(), 50)
    assert np.all(tr.x == 1) and np.all(tr.y == 1)
    tr = simulate(net, params, ControlSets(), ActivationSchedule("round_robin"), 50)
    assert np.all(tr.x == -1) and np.all(tr.y == -1)
    assert tr.stop_reason == "converged"


@pytest.mark.parametrize("kind", ["synchronous", "round_robin", "uniform_random_single"])
def test_complete_five_action_majority_converts(kind):
    net = make_complete(5)
    params = ModelParams.homogeneous(5, 0.4, 0.7)
    tr = simulate(net, params, ControlSets({0, 1, 2}), ActivationSchedule(kind), 10_000, 1)
    assert np.all(tr.final.x == 1) and tr.monotone


def test_simulation_deterministic_and_exports():
    net = make_family("random_regularized", 8, seed=2)
    params = ModelParams.homogeneous(8, 0.4, 0.6)
    args = (net, params, ControlSets({0, 3}, {1}), ActivationSchedule("uniform_random_subset", k=2), 400, 9)
    a, b = simulate(*args), simulate(*args)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "t,node,x,y"
    meta = json.loads(a.metadata_json())
    assert meta["schedule"]["kind"] == "uniform_random_subset" and meta["seed"] == 9
    assert meta["window"] == a.window


def test_stride_keeps_final_snapshot():
    net = make_complete(6)
    params = ModelParams.homogeneous(6, 0.5, 0.5)
    tr = simulate(net, params, ControlSets({0, 1, 2, 3}), ActivationSchedule("round_robin"), 1000, stride=7)
    assert tr.t[0] == 0 and tr.t[-1] == tr.steps
    assert np.all(np.diff(tr.t[:-1]) == 7)
