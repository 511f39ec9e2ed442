import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from glstsp.tsp_core import (Instance, Tour, TsplibError, bundled_instance, bundled_opt_tour,
                             candidate_lists, edge, edges_of, format_tour, format_tsplib,
                             generate_random_instance, has_bundled_opt_tour, nearest_neighbor_tour,
                             optimum_registry, parse_tour, parse_tsplib, random_tour,
                             rectangle_of, tour_cost)

from conftest import make_instance

BUNDLED_WITH_TOURS = ["a280", "att48", "bayg29", "bays29", "berlin52", "brg180", "ch130",
                      "eil101", "eil51", "eil76", "fri26", "gr120", "gr202", "gr24", "gr666",
                      "gr96", "kroA100", "pcb442", "pr76", "rd100", "st70", "tsp225",
                      "ulysses16", "ulysses22"]


def test_three_four_five():
    inst = make_instance([[0, 0], [3, 4], [6, 0]])
    assert inst.distance(0, 1) == 5
    assert inst.matrix[1, 0] == 5


@pytest.mark.parametrize("name", BUNDLED_WITH_TOURS)
def test_bundled_opt_tour_matches_registry(name):
    inst = bundled_instance(name)
    order = bundled_opt_tour(name)
    assert tour_cost(inst, order) == optimum_registry()[name]


def test_att532_header():
    inst = bundled_instance("att532")
    assert inst.n == 532
    assert inst.weight_rule == "ATT"


def test_weight_rules_of_bundled_files():
    assert bundled_instance("ulysses16").weight_rule == "GEO"
    assert bundled_instance("bayg29").weight_rule == "EXPLICIT"
    assert bundled_instance("eil51").weight_rule == "EUC_2D"


def test_att_rounding_rule():
    # sqrt((10^2 + 0) / 10) = 3.162..., rounds to 3 which undershoots -> 4
    inst = make_instance([[0, 0], [10, 0], [0, 30]], "ATT")
    assert inst.distance(0, 1) == 4
    # sqrt(900 / 10) = 9.486..., nint is 9 < r -> 10
    assert inst.distance(0, 2) == 10


def test_ceil_rule():
    inst = make_instance([[0, 0], [1, 1], [3, 0]], "CEIL_2D")
    assert inst.distance(0, 1) == 2  # ceil(1.414)
    assert inst.distance(0, 2) == 3


def test_geo_rule_against_reference_formula():
    inst = bundled_instance("ulysses16")
    c = inst.coords

    def rad(v):
        deg = math.trunc(v)
        return 3.141592 * (deg + 5.0 * (v - deg) / 3.0) / 180.0

    for i, j in [(0, 1), (3, 11), (7, 15)]:
        q1 = math.cos(rad(c[i, 1]) - rad(c[j, 1]))
        q2 = math.cos(rad(c[i, 0]) - rad(c[j, 0]))
        q3 = math.cos(rad(c[i, 0]) + rad(c[j, 0]))
        expect = int(6378.388 * math.acos(0.5 * ((1 + q1) * q2 - (1 - q1) * q3)) + 1.0)
        assert inst.distance(i, j) == expect


EXPLICIT_UPPER = """NAME: tiny
TYPE: TSP
DIMENSION: 4
EDGE_WEIGHT_TYPE: EXPLICIT
EDGE_WEIGHT_FORMAT: UPPER_ROW
EDGE_WEIGHT_SECTION
1 2 3
4 5
6
EOF
"""


def test_explicit_upper_row():
    inst = parse_tsplib(EXPLICIT_UPPER)
    assert inst.distance(0, 3) == 3
    assert inst.distance(3, 1) == 5
    assert inst.distance(2, 3) == 6


def test_explicit_lower_diag_row_equals_upper_row():
    text = EXPLICIT_UPPER.replace("UPPER_ROW", "LOWER_DIAG_ROW").replace(
        "1 2 3\n4 5\n6", "0\n1 0\n2 4 0\n3 5 6 0")
    a, b = parse_tsplib(text), parse_tsplib(EXPLICIT_UPPER)
    assert np.array_equal(a.matrix, b.matrix)


@pytest.mark.parametrize("bad", [
    EXPLICIT_UPPER.replace("TYPE: TSP", "TYPE: ATSP"),
    EXPLICIT_UPPER.replace("EXPLICIT\n", "MAN_3D\n"),
    EXPLICIT_UPPER.replace("DIMENSION: 4", "DIMENSION: four"),
    "NAME: x\nTYPE: TSP\nDIMENSION: 3\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n"
    "1 0 0\n2 1 1\nEOF\n",
])
def test_parser_rejects(bad):
    with pytest.raises(TsplibError):
        parse_tsplib(bad)


def test_tsplib_round_trip():
    inst = generate_random_instance(50, 3)
    back = parse_tsplib(format_tsplib(inst))
    assert back.n == 50
    assert np.array_equal(back.coords, inst.coords)
    assert np.array_equal(back.matrix, inst.matrix)


def test_tour_file_round_trip():
    order = np.array([2, 0, 1, 3])
    assert parse_tour(format_tour("x", order)).tolist() == order.tolist()


def test_all_ones_triangle():
    inst = Instance("tri", None, "EXPLICIT", explicit=np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]]))
    for order in ([0, 1, 2], [2, 1, 0], [1, 0, 2]):
        assert tour_cost(inst, order) == 3


def test_reversed_tour_same_cost():
    inst = bundled_instance("berlin52")
    order = random_tour(inst, 9).order
    assert tour_cost(inst, order) == tour_cost(inst, order[::-1])


def test_edges_of_square():
    assert edges_of(np.array([0, 1, 2, 3])) == {(0, 1), (1, 2), (2, 3), (0, 3)}
    assert edges_of(np.array([3, 2, 1, 0])) == edges_of(np.array([0, 1, 2, 3]))


@given(st.integers(3, 60), st.integers(0, 2**32))
def test_edges_have_size_n(n, seed):
    order = np.random.default_rng(seed).permutation(n)
    other = np.random.default_rng(seed + 1).permutation(n)
    e1, e2 = edges_of(order), edges_of(other)
    assert len(e1) == n == len(e2)
    assert len(e1 - e2) == len(e2 - e1)
    assert all(a < b for a, b in e1)


def test_edge_canonical():
    assert edge(7, 3) == (3, 7)
    with pytest.raises(ValueError):
        edge(2, 2)


def test_random_tours_are_valid():
    inst = generate_random_instance(30, 0)
    for seed in range(1000):
        random_tour(inst, seed).check(inst)


def test_nearest_neighbor_collinear():
    inst = make_instance([[0, 0], [1, 0], [3, 0]])
    assert nearest_neighbor_tour(inst, 0).order.tolist() == [0, 1, 2]


def test_nearest_neighbor_tie_goes_to_lowest_index():
    inst = make_instance([[0, 0], [5, 0], [-5, 0], [0, 20]])
    assert nearest_neighbor_tour(inst, 0).order.tolist()[:2] == [0, 1]


@pytest.mark.parametrize("name", ["eil51", "berlin52", "st70"])
def test_nearest_neighbor_not_below_optimum(name):
    inst = bundled_instance(name)
    opt = optimum_registry()[name]
    assert all(nearest_neighbor_tour(inst, s).cost_g >= opt for s in range(0, inst.n, 7))


def test_generator_deterministic_and_bounded():
    a = generate_random_instance(1000, 42)
    b = generate_random_instance(1000, 42)
    assert format_tsplib(a) == format_tsplib(b)
    w, h = rectangle_of(a)
    assert 1e5 < w < 1.1e6 and 1e5 < h < 1.1e6
    big = generate_random_instance(10**6, 5)
    w, h = rectangle_of(big)
    c = big.coords
    assert (c[:, 0] >= 0).all() and (c[:, 0] <= w).all()
    assert (c[:, 1] >= 0).all() and (c[:, 1] <= h).all()


def test_generator_rejects_tiny():
    with pytest.raises(ValueError):
        generate_random_instance(2, 0)


def test_large_instance_without_matrix():
    inst = generate_random_instance(6000, 1)
    assert not inst.has_matrix
    assert inst.neighbors.shape == (6000, 20)
    rng = np.random.default_rng(0)
    for a, b in rng.integers(0, 6000, size=(50, 2)):
        if a != b:
            assert inst.distance(a, b) == inst.distance(b, a) > 0


@pytest.mark.parametrize("name", ["att532", "gr666", "rd400", "bayg29"])
def test_symmetry_and_positivity(name):
    inst = bundled_instance(name)
    rng = np.random.default_rng(1)
    pairs = rng.integers(0, inst.n, size=(10**4, 2))
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    d = inst.matrix[pairs[:, 0], pairs[:, 1]]
    assert (d == inst.matrix[pairs[:, 1], pairs[:, 0]]).all()
    assert (d > 0).all()


def test_candidate_lists_sorted():
    inst = bundled_instance("eil51")
    nb = candidate_lists(inst, 5)
    for a in range(inst.n):
        d = inst.matrix[a, nb[a]]
        assert a not in nb[a]
        assert (np.diff(d) >= 0).all()
        assert d[-1] <= np.sort(np.delete(inst.matrix[a], a))[4]


def test_full_neighborhood_below_threshold():
    assert bundled_instance("eil51").neighbors.shape == (51, 50)
