import numpy as np
import pytest
from hypothesis import given, strategies as st

from glstsp.landscape import (DegenerateDataError, OptimaPool, PoolStats, TrajectorySample,
                              big_valley_check, bond_distance, canonical, fdc,
                              nearest_optimum_distance, optima_pool_stats, read_corpus,
                              scatter_rows, write_corpus, write_scatter)
from glstsp.tsp_core import edges_of

from oracles import population_fdc


def perm(n, seed):
    return np.random.default_rng(seed).permutation(n)


def test_bond_distance_examples():
    t = np.array([0, 1, 2, 3, 4])
    assert bond_distance(t, t) == 0
    assert bond_distance(t, t[::-1]) == 0
    assert bond_distance(np.roll(t, 2), t) == 0
    assert bond_distance([0, 1, 2, 3], [0, 2, 1, 3]) == 2


def test_bond_distance_rejects_size_mismatch():
    with pytest.raises(ValueError):
        bond_distance([0, 1, 2], [0, 1, 2, 3])


@given(st.integers(3, 80), st.integers(0, 2**31))
def test_bond_distance_against_edge_sets(n, seed):
    a, b = perm(n, seed), perm(n, seed + 7)
    d = bond_distance(a, b)
    assert d == len(edges_of(a) - edges_of(b)) == bond_distance(b, a)
    assert 0 <= d <= n
    assert (d == 0) == (edges_of(a) == edges_of(b))


def test_fdc_self_correlation():
    x = [5, 3, 9, 1, 7]
    assert fdc(x, x) == pytest.approx(1.0)
    assert fdc(x, [-v for v in x]) == pytest.approx(-1.0)


@pytest.mark.parametrize("x,y", [([1, 1, 1], [1, 2, 3]), ([1, 2, 3], [4, 4, 4]), ([1], [2])])
def test_fdc_degenerate(x, y):
    with pytest.raises(DegenerateDataError):
        fdc(x, y)


def test_fdc_matches_direct_formula():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        x = rng.integers(0, 1000, n).tolist()
        y = rng.integers(0, 300, n).tolist()
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        assert fdc(x, y) == pytest.approx(population_fdc(x, y), rel=1e-12, abs=1e-15)


@given(st.lists(st.tuples(st.integers(0, 100), st.integers(0, 100)), min_size=3, max_size=30),
       st.floats(0.1, 50), st.floats(-100, 100))
def test_fdc_affine_invariance(pairs, scale, shift):
    x, y = zip(*pairs)
    if len(set(x)) == 1 or len(set(y)) == 1:
        return
    r = fdc(x, y)
    assert fdc([scale * v + shift for v in x], y) == pytest.approx(r, abs=1e-9)
    assert fdc(x, [-v for v in y]) == pytest.approx(-r, abs=1e-9)


def test_canonical_form():
    assert canonical([2, 3, 0, 1]) == (0, 1, 2, 3)
    assert canonical([3, 2, 1, 0]) == (0, 1, 2, 3)
    t = perm(30, 1)
    assert canonical(np.roll(t, 5)) == canonical(t[::-1]) == canonical(t)


def test_pool_dedup_and_membership():
    t = perm(20, 2)
    pool = OptimaPool(100)
    assert pool.add(t, 100)
    assert not pool.add(np.roll(t, 3), 100)
    assert not pool.add(t[::-1], 100)
    assert len(pool) == 1 and t in pool
    with pytest.raises(ValueError):
        pool.add(perm(20, 3), 99)


def test_nearest_optimum_distance():
    a, b, c = perm(25, 1), perm(25, 2), perm(25, 3)
    pool = OptimaPool(None, [a])
    assert nearest_optimum_distance(a, pool) == 0
    assert nearest_optimum_distance(c, pool) == bond_distance(c, a)
    pool.add(b)
    assert nearest_optimum_distance(c, pool) == min(bond_distance(c, a), bond_distance(c, b))
    with pytest.raises(ValueError):
        nearest_optimum_distance(c, OptimaPool())


def test_pool_stats():
    base = list(range(10))
    other = [0, 1, 3, 2, 4, 5, 6, 7, 8, 9]
    pool = OptimaPool(None, [base, other])
    assert optima_pool_stats(pool) == PoolStats(2, 2, 2.0, 2)
    assert optima_pool_stats(OptimaPool(None, [base])) == PoolStats(1, None, None, None)
    rng = np.random.default_rng(0)
    big = OptimaPool(None, [rng.permutation(40) for _ in range(6)])
    s = optima_pool_stats(big)
    assert s.min <= s.mean <= s.max


def test_pool_file_round_trip(tmp_path):
    pool = OptimaPool(55, [perm(12, 1), perm(12, 2)])
    pool.save(tmp_path / "p.optima")
    back = OptimaPool.load(tmp_path / "p.optima")
    assert back.cost == 55 and list(back) == list(pool)


def test_big_valley_on_clustered_pool():
    rng = np.random.default_rng(1)
    base = np.arange(200)
    other = base.copy()
    other[[10, 11]] = other[[11, 10]]
    pool = OptimaPool(1000, [base, other])
    corpus = []
    for k in range(60):
        t = base.copy()
        for _ in range(int(rng.integers(1, 30))):
            i, j = sorted(rng.choice(200, 2, replace=False))
            t[i:j + 1] = t[i:j + 1][::-1]
        d = nearest_optimum_distance(t, pool)
        corpus.append(TrajectorySample(k, 1, 1000 + 5 * d + int(rng.integers(0, 3)), tuple(t)))
    rep = big_valley_check(pool, corpus, 200)
    assert rep.req1 and rep.req2 and rep.big_valley
    assert rep.mean_opt_dist == 2.0


def test_spread_pool_fails_first_requirement():
    stats = PoolStats(count=10, min=777, mean=884.0, max=992)
    rep = big_valley_check(stats, [(1, 2), (2, 3), (3, 5)], 2319)
    assert not rep.req1


def test_random_tour_pool_not_clustered():
    rng = np.random.default_rng(5)
    for n in (50, 200, 800):
        pool = OptimaPool(None, [rng.permutation(n) for _ in range(5)])
        rep = big_valley_check(pool, [(1, 1), (2, 3), (3, 2)], n)
        assert not rep.req1


def test_corpus_and_scatter_io(tmp_path):
    samples = [TrajectorySample(0, 1, 120, (0, 1, 2, 3)), TrajectorySample("gls-1", 5, 110,
                                                                         (0, 2, 1, 3))]
    assert write_corpus(tmp_path / "c.txt", samples) == 2
    assert read_corpus(tmp_path / "c.txt") == samples
    pool = OptimaPool(100, [[0, 1, 2, 3]])
    rows = scatter_rows(samples, pool)
    assert rows == [(0, 20.0), (2, 10.0)]
    write_scatter(tmp_path / "s.csv", rows)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "distance,excess_percent" and len(lines) == 3
