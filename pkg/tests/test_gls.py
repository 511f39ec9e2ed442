from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from glstsp.gls import (GlsConfig, SearchState, Stop, compute_lambda, penalize, penalize_tour,
                        run_gls, utility)
from glstsp.penalties import PenaltyStore
from glstsp.tsp_core import (Instance, Tour, bundled_instance, edge, generate_random_instance,
                             optimum_registry, random_tour)

from oracles import brute_argmax


class _Plain:
    def __init__(self, inst):
        self.inst = inst
        self.penalties = PenaltyStore(inst.n)


def explicit(rows):
    return Instance("m", None, "EXPLICIT", explicit=np.array(rows))


def test_compute_lambda_values():
    assert compute_lambda(30000, 532, 0.3) == Fraction(9000, 532)
    assert float(compute_lambda(30000, 532)) == pytest.approx(16.917, abs=1e-3)
    assert compute_lambda(77, 77, 0.3) == Fraction(3, 10)
    assert compute_lambda(2000, 100) == 2 * compute_lambda(1000, 100)


@pytest.mark.parametrize("args", [(0, 10), (-5, 10), (100, 2)])
def test_compute_lambda_rejects(args):
    with pytest.raises(ValueError):
        compute_lambda(*args)


def test_utility_values():
    e = edge(0, 1)
    assert utility(e, False, 10, 0) == 0
    assert utility(e, True, 10, 0) == 10
    assert utility(e, True, 10, 4) == 2


@given(st.integers(1, 10**6), st.integers(0, 1000))
def test_utility_decreasing_in_penalty(c, p):
    assert utility(None, True, c, p + 1) < utility(None, True, c, p)


def test_penalize_picks_strict_maximum():
    inst = explicit([[0, 10, 10], [10, 0, 8], [10, 8, 0]])
    state = _Plain(inst)
    state.penalties.increment((2, 0))
    # utilities: (0,1) -> 10, (1,2) -> 8, (2,0) -> 10/2 = 5
    chosen = penalize(state, Tour.from_order(inst, [0, 1, 2]), utility)
    assert chosen == {(0, 1)}
    assert state.penalties[(0, 1)] == 1 and state.penalties[(0, 2)] == 1


def test_full_tie_penalizes_every_edge():
    inst = explicit(np.ones((6, 6), dtype=int) - np.eye(6, dtype=int))
    state = _Plain(inst)
    tour = random_tour(inst, 3)
    assert penalize(state, tour, utility) == tour.edges()
    assert penalize_tour(inst, tour, PenaltyStore(6)) == tour.edges()


def test_repeated_penalization_spreads():
    inst = generate_random_instance(12, 4)
    tour = random_tour(inst, 4)
    state = _Plain(inst)
    edges = list(tour.order.tolist())
    cost = {edge(a, b): inst.distance(a, b) for a, b in zip(edges, edges[1:] + edges[:1])}
    sim = {e: 0 for e in cost}
    for _ in range(200):
        got = penalize(state, tour, utility)
        utils = {e: Fraction(c, 1 + sim[e]) for e, c in cost.items()}
        top = max(utils.values())
        want = {e for e, u in utils.items() if u == top}
        for e in want:
            sim[e] += 1
        assert got == want
    assert all(state.penalties[e] == sim[e] >= 1 for e in cost)


def test_compiled_penalization_matches_reference():
    rng = np.random.default_rng(7)
    for trial in range(200):
        n = int(rng.integers(3, 40))
        # few distinct costs so that ties are common
        inst = explicit(_random_symmetric(rng, n, 6))
        tour = random_tour(inst, trial)
        ref = _Plain(inst)
        for _ in range(int(rng.integers(0, 3 * n))):
            a, b = rng.choice(n, 2, replace=False)
            ref.penalties.increment((int(a), int(b)))
        compiled = ref.penalties.copy()
        utils = [utility(e, True, inst.distance(*e), ref.penalties[e]) for e in _cycle(tour)]
        want = {_cycle(tour)[k] for k in brute_argmax(utils)}
        assert penalize(ref, tour, utility) == want
        assert penalize_tour(inst, tour, compiled) == want
        assert compiled.as_dict() == ref.penalties.as_dict()
        assert compiled.total == ref.penalties.total


def _cycle(tour):
    o = tour.order.tolist()
    return [edge(a, b) for a, b in zip(o, o[1:] + o[:1])]


def _random_symmetric(rng, n, levels):
    m = rng.integers(1, levels + 1, size=(n, n))
    m = np.triu(m, 1)
    return m + m.T


def test_square_solved_quickly(unit_square):
    for seed in range(10):
        best, state = run_gls(unit_square, GlsConfig(stop=Stop(max_iterations=10), seed=seed))
        assert best.cost_g == 40
        best.check(unit_square)


def test_eil51_reaches_optimum():
    opt = optimum_registry()["eil51"]
    best, state = run_gls(bundled_instance("eil51"),
                          GlsConfig(stop=Stop(time_limit=6, target_cost=opt), seed=1))
    assert best.cost_g == opt
    assert state.stop_reason == "target"


def test_deterministic_for_fixed_seed():
    inst = bundled_instance("st70")
    cfg = GlsConfig(stop=Stop(max_iterations=3000), seed=5)
    runs = [run_gls(inst, cfg) for _ in range(2)]
    assert runs[0][0].order.tolist() == runs[1][0].order.tolist()
    assert runs[0][1].iteration == runs[1][1].iteration == 3000
    assert runs[0][1].penalties.as_dict() == runs[1][1].penalties.as_dict()


@pytest.mark.parametrize("stop", [Stop(max_iterations=0), Stop(time_limit=0)])
def test_zero_budget_returns_start(stop):
    inst = bundled_instance("berlin52")
    best, state = run_gls(inst, GlsConfig(stop=stop, seed=3))
    assert best.cost_g == random_tour(inst, 3).cost_g
    assert state.iteration == 0


def test_nearest_neighbor_start():
    inst = bundled_instance("eil51")
    _, state = run_gls(inst, GlsConfig(stop=Stop(max_iterations=0), start="nn", seed=2))
    assert state.start_cost < random_tour(inst, 2).cost_g


def test_lambda_from_first_local_optimum():
    inst = bundled_instance("berlin52")
    state = SearchState(inst, random_tour(inst, 0))
    state.step(1)
    assert state.lambda_set
    first = state.current.cost_g  # no penalty yet changes the tour after iteration 1
    assert state.lam == compute_lambda(first, inst.n, 0.3)


def test_h_identity_and_penalty_accounting():
    inst = bundled_instance("st70")
    state = SearchState(inst, random_tour(inst, 1))
    total = 0
    for _ in range(300):
        before = state.penalties.total
        state.step(1)
        hit = state.last_penalized()
        assert state.penalties.total - before == len(hit)
        total += len(hit)
        order = state.current.order.tolist()
        direct = sum(state.penalties[edge(a, b)] for a, b in zip(order, order[1:] + order[:1]))
        assert state.h_minus_g() == state.lam * direct
    assert state.penalties.total == total == sum(state.penalties.as_dict().values())


def test_best_is_never_worse_than_visited_tours():
    inst = bundled_instance("eil76")
    state = SearchState(inst, random_tour(inst, 2))
    seen = []
    for _ in range(500):
        _, costs = state.step(1)
        seen.append(state.current.cost_g)
        assert costs[-1] == state.best_cost
    best = state.best_tour()
    best.check(inst)
    assert best.cost_g == state.best_cost <= min(seen)


def test_trace_non_increasing():
    inst = bundled_instance("kroA100")
    trace = []
    run_gls(inst, GlsConfig(stop=Stop(max_iterations=2000), seed=0), trace=trace)
    assert len(trace) == 2000
    assert all(b <= a for a, b in zip(trace, trace[1:]))


def test_zero_lambda_never_escapes():
    inst = bundled_instance("eil51")
    state = SearchState(inst, random_tour(inst, 0), coeff=Fraction(0))
    state.step(1)
    first = state.current.order.copy()
    state.step(20)
    assert np.array_equal(state.current.order, first)


def test_penalty_table_grows():
    inst = bundled_instance("eil51")
    state = SearchState(inst, random_tour(inst, 0))
    start_cap = state.penalties.keys.shape[0]
    state.step(3000)
    assert state.penalties.keys.shape[0] > start_cap
    assert len(state.penalties) == len(state.penalties.as_dict())


def test_hooks_fire():
    inst = bundled_instance("eil76")
    improved, checkpoints = [], []
    run_gls(inst, GlsConfig(stop=Stop(max_iterations=2500), seed=4),
            on_improve=lambda s, it, c: improved.append((it, c)),
            on_checkpoint=lambda s: checkpoints.append(s.iteration), checkpoint_stride=1000)
    assert checkpoints == [1000, 2000]
    its = [i for i, _ in improved]
    assert its == sorted(set(its)) and its[0] == 1
    assert all(b < a for (_, a), (_, b) in zip(improved, improved[1:]))


def test_config_validation():
    with pytest.raises(ValueError):
        GlsConfig(lambda_coefficient=0)
    with pytest.raises(ValueError):
        GlsConfig(start="greedy")
    with pytest.raises(ValueError):
        Stop()
