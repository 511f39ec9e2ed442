"""Symmetric TSP data model: instances, tours and undirected edges.

Cities are 0-based internally. TSPLIB files use 1-based node ids; the
parser and writers translate at the boundary.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np
from numba import njit

#: Full distance matrices are cached up to this many cities.
MATRIX_CACHE_LIMIT = 5000
#: Above this many cities, moves are restricted to k nearest neighbours.
FULL_NEIGHBORHOOD_LIMIT = 1000
NEIGHBOR_K = 20

WEIGHT_RULES = ("EUC_2D", "CEIL_2D", "ATT", "GEO", "EXPLICIT")
_RULE_CODE = {"EUC_2D": 0, "CEIL_2D": 1, "ATT": 2, "GEO": 3, "EXPLICIT": 4}


class TsplibError(ValueError):
    """Raised for unsupported or malformed TSPLIB input."""


class EdgeKey(NamedTuple):
    """Undirected edge in canonical form ``lo < hi``."""

    lo: int
    hi: int


def edge(a: int, b: int) -> EdgeKey:
    a, b = int(a), int(b)
    if a == b:
        raise ValueError(f"self-loop {a}")
    return EdgeKey(a, b) if a < b else EdgeKey(b, a)


# --- distance rules ---------------------------------------------------------

@njit(cache=True, inline="always")
def _nint(x):
    return np.int64(x + 0.5)


@njit(cache=True)
def _geo_radians(v):
    deg = np.int64(v)  # truncation, as in the TSPLIB reference code
    minutes = v - deg
    return 3.141592 * (deg + 5.0 * minutes / 3.0) / 180.0


@njit(cache=True)
def coord_distance(coords, rule, i, j):
    """Integer TSPLIB distance between cities ``i`` and ``j``."""
    if rule == 3:
        lat_i = _geo_radians(coords[i, 0])
        lon_i = _geo_radians(coords[i, 1])
        lat_j = _geo_radians(coords[j, 0])
        lon_j = _geo_radians(coords[j, 1])
        q1 = math.cos(lon_i - lon_j)
        q2 = math.cos(lat_i - lat_j)
        q3 = math.cos(lat_i + lat_j)
        arg = 0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)
        arg = min(1.0, max(-1.0, arg))
        return np.int64(6378.388 * math.acos(arg) + 1.0)
    dx = coords[i, 0] - coords[j, 0]
    dy = coords[i, 1] - coords[j, 1]
    if rule == 2:
        r = math.sqrt((dx * dx + dy * dy) / 10.0)
        t = _nint(r)
        return t + 1 if t < r else t
    d = math.sqrt(dx * dx + dy * dy)
    if rule == 1:
        return np.int64(math.ceil(d))
    return _nint(d)


@njit(cache=True)
def _fill_matrix(coords, rule, out):
    n = coords.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            d = coord_distance(coords, rule, i, j)
            out[i, j] = d
            out[j, i] = d


@njit(cache=True)
def _distance_row(coords, rule, i, out):
    for j in range(coords.shape[0]):
        out[j] = 0 if j == i else coord_distance(coords, rule, i, j)


# --- instance ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable symmetric TSP instance.

    Either ``coords`` (N x 2 floats) or ``explicit`` (N x N integer matrix)
    is set, according to ``weight_rule``.
    """

    name: str
    coords: np.ndarray | None
    weight_rule: str
    explicit: np.ndarray | None = None
    comment: str = ""
    cache_limit: int = field(default=MATRIX_CACHE_LIMIT, repr=False)

    def __post_init__(self):
        if self.weight_rule not in WEIGHT_RULES:
            raise TsplibError(f"unsupported EDGE_WEIGHT_TYPE {self.weight_rule}")
        if self.weight_rule == "EXPLICIT":
            if self.explicit is None:
                raise TsplibError("EXPLICIT instance without a matrix")
            m = np.ascontiguousarray(self.explicit, dtype=np.int64)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise TsplibError("explicit matrix must be square")
            if not np.array_equal(m, m.T):
                raise TsplibError("explicit matrix is not symmetric")
            m.flags.writeable = False
            object.__setattr__(self, "explicit", m)
            n = m.shape[0]
        else:
            if self.coords is None:
                raise TsplibError(f"{self.weight_rule} instance without coordinates")
            c = np.ascontiguousarray(self.coords, dtype=np.float64)
            if c.ndim != 2 or c.shape[1] != 2:
                raise TsplibError("coordinates must be N x 2")
            c.flags.writeable = False
            object.__setattr__(self, "coords", c)
            n = c.shape[0]
        if n < 3:
            raise TsplibError(f"need at least 3 cities, got {n}")

    @property
    def n(self) -> int:
        if self.explicit is not None:
            return self.explicit.shape[0]
        return self.coords.shape[0]

    @property
    def rule_code(self) -> int:
        return _RULE_CODE[self.weight_rule]

    @property
    def has_matrix(self) -> bool:
        return self.weight_rule == "EXPLICIT" or self.n <= self.cache_limit

    @cached_property
    def matrix(self) -> np.ndarray:
        """Full int32 distance matrix; empty (0 x 0) above the cache limit."""
        if self.weight_rule == "EXPLICIT":
            m = self.explicit.astype(np.int32)
        elif self.n <= self.cache_limit:
            m64 = np.zeros((self.n, self.n), dtype=np.int64)
            _fill_matrix(self.coords, self.rule_code, m64)
            if m64.max() > np.iinfo(np.int32).max:
                raise OverflowError("distances exceed int32")
            m = m64.astype(np.int32)
        else:
            m = np.zeros((0, 0), dtype=np.int32)
        m.flags.writeable = False
        return m

    @property
    def kernel_coords(self) -> np.ndarray:
        if self.coords is None:
            return np.zeros((0, 2), dtype=np.float64)
        return self.coords

    def distance(self, a: int, b: int) -> int:
        if a == b:
            return 0
        if self.has_matrix:
            return int(self.matrix[a, b])
        return int(coord_distance(self.coords, self.rule_code, a, b))

    def distance_row(self, i: int) -> np.ndarray:
        if self.has_matrix:
            return self.matrix[i].astype(np.int64)
        row = np.empty(self.n, dtype=np.int64)
        _distance_row(self.coords, self.rule_code, i, row)
        return row

    @cached_property
    def neighbors(self) -> np.ndarray:
        """Candidate lists: cities sorted by distance, ties by index.

        Full lists (N-1 entries) up to ``FULL_NEIGHBORHOOD_LIMIT`` cities,
        the ``NEIGHBOR_K`` nearest above.
        """
        k = self.n - 1 if self.n <= FULL_NEIGHBORHOOD_LIMIT else NEIGHBOR_K
        return candidate_lists(self, k)


def candidate_lists(inst: Instance, k: int) -> np.ndarray:
    n = inst.n
    k = min(k, n - 1)
    out = np.empty((n, k), dtype=np.int32)
    idx = np.arange(n)
    for i in range(n):
        row = inst.distance_row(i)
        row[i] = np.iinfo(np.int64).max
        if k < n - 1:
            # keep every city tied with the k-th distance so the index tie-break is exact
            kth = np.partition(row, k - 1)[k - 1]
            cand = np.flatnonzero(row <= kth)
        else:
            cand = idx[idx != i]
        order = np.lexsort((cand, row[cand]))
        out[i] = cand[order[:k]]
    out.flags.writeable = False
    return out


# --- TSPLIB I/O -------------------------------------------------------------

_SECTIONS = {"NODE_COORD_SECTION", "EDGE_WEIGHT_SECTION", "DISPLAY_DATA_SECTION",
             "TOUR_SECTION", "FIXED_EDGES_SECTION", "DEPOT_SECTION", "DEMAND_SECTION"}


def _tokenize(text: str):
    """Split TSPLIB text into (header dict, {section: [tokens]})."""
    header: dict[str, str] = {}
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        if ":" in line:
            key, value = (s.strip() for s in line.split(":", 1))
            key = key.upper()
            if key in _SECTIONS and not value:
                current = sections.setdefault(key, [])
            else:
                header[key] = value
                current = None
            continue
        first = line.split()[0].upper()
        if first in _SECTIONS:
            current = sections.setdefault(first, [])
            continue
        if current is None:
            raise TsplibError(f"unexpected line outside a section: {raw!r}")
        current.extend(line.split())
    return header, sections


def _explicit_matrix(tokens: list[str], n: int, fmt: str) -> np.ndarray:
    vals = [int(float(t)) for t in tokens]
    m = np.zeros((n, n), dtype=np.int64)
    # column-wise formats of a symmetric matrix equal the opposite row-wise format
    fmt = {"UPPER_COL": "LOWER_ROW", "LOWER_COL": "UPPER_ROW",
           "UPPER_DIAG_COL": "LOWER_DIAG_ROW", "LOWER_DIAG_COL": "UPPER_DIAG_ROW"}.get(fmt, fmt)
    if fmt == "FULL_MATRIX":
        pairs = [(i, j) for i in range(n) for j in range(n)]
    elif fmt == "UPPER_ROW":
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    elif fmt == "LOWER_ROW":
        pairs = [(i, j) for i in range(n) for j in range(i)]
    elif fmt == "UPPER_DIAG_ROW":
        pairs = [(i, j) for i in range(n) for j in range(i, n)]
    elif fmt == "LOWER_DIAG_ROW":
        pairs = [(i, j) for i in range(n) for j in range(i + 1)]
    else:
        raise TsplibError(f"unsupported EDGE_WEIGHT_FORMAT {fmt}")
    if len(vals) != len(pairs):
        raise TsplibError(f"EDGE_WEIGHT_SECTION has {len(vals)} values, expected {len(pairs)}")
    for (i, j), v in zip(pairs, vals):
        m[i, j] = v
        m[j, i] = v
    np.fill_diagonal(m, 0)
    return m


def parse_tsplib(text: str | io.TextIOBase) -> Instance:
    """Parse a symmetric TSPLIB instance."""
    if not isinstance(text, str):
        text = text.read()
    header, sections = _tokenize(text)
    kind = header.get("TYPE", "TSP").split()[0].upper()
    if kind != "TSP":
        raise TsplibError(f"unsupported TYPE {kind} (symmetric TSP only)")
    try:
        n = int(header["DIMENSION"])
    except (KeyError, ValueError):
        raise TsplibError("missing or malformed DIMENSION") from None
    rule = header.get("EDGE_WEIGHT_TYPE", "").upper()
    if rule not in WEIGHT_RULES:
        raise TsplibError(f"unsupported EDGE_WEIGHT_TYPE {rule!r}")
    name = header.get("NAME", "unnamed").split()[0]
    comment = header.get("COMMENT", "")
    if rule == "EXPLICIT":
        fmt = header.get("EDGE_WEIGHT_FORMAT", "").upper()
        if "EDGE_WEIGHT_SECTION" not in sections:
            raise TsplibError("EXPLICIT instance without EDGE_WEIGHT_SECTION")
        m = _explicit_matrix(sections["EDGE_WEIGHT_SECTION"], n, fmt)
        return Instance(name, None, rule, explicit=m, comment=comment)
    toks = sections.get("NODE_COORD_SECTION")
    if toks is None:
        raise TsplibError("missing NODE_COORD_SECTION")
    if len(toks) % 3 != 0:
        raise TsplibError("NODE_COORD_SECTION must hold 'id x y' triples")
    if len(toks) // 3 != n:
        raise TsplibError(f"{len(toks) // 3} coordinates for DIMENSION {n}")
    coords = np.empty((n, 2))
    seen = set()
    for k in range(n):
        node = int(toks[3 * k]) - 1
        if not 0 <= node < n or node in seen:
            raise TsplibError(f"bad node id {node + 1}")
        seen.add(node)
        coords[node] = float(toks[3 * k + 1]), float(toks[3 * k + 2])
    return Instance(name, coords, rule, comment=comment)


def load_instance(path: str | Path) -> Instance:
    with open(path) as fh:
        return parse_tsplib(fh.read())


def parse_tour(text: str) -> np.ndarray:
    """Parse a TSPLIB ``.tour`` file into a 0-based order."""
    header, sections = _tokenize(text)
    toks = sections.get("TOUR_SECTION")
    if toks is None:
        raise TsplibError("missing TOUR_SECTION")
    ids = []
    for t in toks:
        v = int(t)
        if v == -1:
            break
        ids.append(v - 1)
    order = np.array(ids, dtype=np.int32)
    if "DIMENSION" in header and int(header["DIMENSION"]) != len(order):
        raise TsplibError("tour length does not match DIMENSION")
    return order


def format_tsplib(inst: Instance) -> str:
    """TSPLIB text for a coordinate instance (floats written round-trip exact)."""
    if inst.coords is None:
        raise TsplibError("only coordinate instances can be written")
    lines = [f"NAME : {inst.name}", "TYPE : TSP"]
    if inst.comment:
        lines.append(f"COMMENT : {inst.comment}")
    lines += [f"DIMENSION : {inst.n}", f"EDGE_WEIGHT_TYPE : {inst.weight_rule}",
              "NODE_COORD_SECTION"]
    lines += [f"{i + 1} {x!r} {y!r}" for i, (x, y) in enumerate(inst.coords.tolist())]
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def format_tour(name: str, order: Iterable[int], comment: str = "") -> str:
    order = [int(c) for c in order]
    lines = [f"NAME : {name}", "TYPE : TOUR"]
    if comment:
        lines.append(f"COMMENT : {comment}")
    lines += [f"DIMENSION : {len(order)}", "TOUR_SECTION"]
    lines += [str(c + 1) for c in order]
    lines += ["-1", "EOF"]
    return "\n".join(lines) + "\n"


# --- bundled data -----------------------------------------------------------

def _data_file(name: str):
    return resources.files("glstsp").joinpath("data", name)


def bundled_instance(name: str) -> Instance:
    """Load one of the TSPLIB instances shipped in ``glstsp/data/tsplib``."""
    return parse_tsplib(_data_file(f"tsplib/{name}.tsp").read_text())


def bundled_opt_tour(name: str) -> np.ndarray:
    return parse_tour(_data_file(f"tsplib/{name}.opt.tour").read_text())


def has_bundled_opt_tour(name: str) -> bool:
    return _data_file(f"tsplib/{name}.opt.tour").is_file()


def optimum_registry() -> dict[str, int]:
    """TSPLIB instance name -> optimal tour length."""
    reg = {}
    for line in _data_file("optima.txt").read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            name, cost = line.split()
            reg[name] = int(cost)
    return reg


def resolve_instance(spec: str) -> Instance:
    """Load an instance from a path, or by bundled TSPLIB name."""
    p = Path(spec)
    if p.is_file():
        return load_instance(p)
    if _data_file(f"tsplib/{spec}.tsp").is_file():
        return bundled_instance(spec)
    raise FileNotFoundError(spec)


# --- tours ------------------------------------------------------------------

@njit(cache=True)
def _order_cost(order, matrix, coords, rule):
    n = order.shape[0]
    total = np.int64(0)
    use_matrix = matrix.shape[0] > 0
    for k in range(n):
        a = order[k]
        b = order[(k + 1) % n]
        if use_matrix:
            total += matrix[a, b]
        else:
            total += coord_distance(coords, rule, a, b)
    return total


def tour_cost(inst: Instance, order) -> int:
    """Sum of the N cyclic edge lengths of ``order``."""
    order = np.ascontiguousarray(order, dtype=np.int32)
    return int(_order_cost(order, inst.matrix, inst.kernel_coords, inst.rule_code))


def is_permutation(order, n: int) -> bool:
    order = np.asarray(order)
    return order.shape == (n,) and np.array_equal(np.sort(order), np.arange(n))


@dataclass(eq=False)
class Tour:
    """Hamiltonian cycle with position index and cached cost.

    ``order`` and ``position`` are owned by the tour and mutated in place by
    the search engine.
    """

    order: np.ndarray
    position: np.ndarray
    cost_g: int

    @classmethod
    def from_order(cls, inst: Instance, order) -> "Tour":
        order = np.array(order, dtype=np.int32)
        if not is_permutation(order, inst.n):
            raise ValueError("order is not a permutation of the cities")
        pos = np.empty(inst.n, dtype=np.int32)
        pos[order] = np.arange(inst.n, dtype=np.int32)
        return cls(order, pos, tour_cost(inst, order))

    @property
    def n(self) -> int:
        return len(self.order)

    def copy(self) -> "Tour":
        return Tour(self.order.copy(), self.position.copy(), self.cost_g)

    def succ(self, city: int) -> int:
        return int(self.order[(self.position[city] + 1) % self.n])

    def pred(self, city: int) -> int:
        return int(self.order[self.position[city] - 1])

    def edges(self) -> set[EdgeKey]:
        return edges_of(self)

    def check(self, inst: Instance) -> None:
        """Raise AssertionError unless all tour invariants hold."""
        assert is_permutation(self.order, inst.n)
        assert np.array_equal(self.position[self.order], np.arange(inst.n))
        assert self.cost_g == tour_cost(inst, self.order)


def edges_of(tour) -> set[EdgeKey]:
    """The N canonical undirected edges of a tour (or a raw order)."""
    order = tour.order if isinstance(tour, Tour) else np.asarray(tour)
    nxt = np.roll(order, -1)
    lo = np.minimum(order, nxt).tolist()
    hi = np.maximum(order, nxt).tolist()
    return {EdgeKey(a, b) for a, b in zip(lo, hi)}


def random_tour(inst: Instance, seed) -> Tour:
    rng = np.random.default_rng(seed)
    return Tour.from_order(inst, rng.permutation(inst.n))


@njit(cache=True)
def _nearest_neighbor(n, start, matrix, coords, rule):
    order = np.empty(n, dtype=np.int32)
    visited = np.zeros(n, dtype=np.bool_)
    use_matrix = matrix.shape[0] > 0
    cur = start
    order[0] = cur
    visited[cur] = True
    for k in range(1, n):
        best = -1
        best_d = np.int64(0)
        for j in range(n):  # ascending j: ties go to the lowest index
            if visited[j]:
                continue
            d = matrix[cur, j] if use_matrix else coord_distance(coords, rule, cur, j)
            if best < 0 or d < best_d:
                best = j
                best_d = d
        order[k] = best
        visited[best] = True
        cur = best
    return order


def nearest_neighbor_tour(inst: Instance, start_city: int = 0) -> Tour:
    if not 0 <= start_city < inst.n:
        raise ValueError(f"start city {start_city} out of range")
    order = _nearest_neighbor(inst.n, start_city, inst.matrix, inst.kernel_coords,
                              inst.rule_code)
    return Tour.from_order(inst, order)


def generate_random_instance(n: int, seed, name: str | None = None) -> Instance:
    """Uniform random EUC_2D instance on a random-sized rectangle.

    Width and height are drawn from U(1e5, 1.1e6); cities uniformly inside.
    """
    if n < 3:
        raise ValueError("n must be at least 3")
    rng = np.random.default_rng(seed)
    lo, hi = 1e5, 1.1e6
    width, height = rng.uniform(lo, hi, size=2)
    while not (lo < width < hi and lo < height < hi):  # open interval
        width, height = rng.uniform(lo, hi, size=2)
    coords = rng.uniform(0.0, 1.0, size=(n, 2)) * np.array([width, height])
    name = name or f"rand{n}_{seed}"
    comment = f"width={float(width)!r} height={float(height)!r}"
    return Instance(name, coords, "EUC_2D", comment=comment)


def rectangle_of(inst: Instance) -> tuple[float, float]:
    """(width, height) recorded in a generated instance's comment."""
    parts = dict(p.split("=") for p in inst.comment.split())
    return float(parts["width"]), float(parts["height"])
