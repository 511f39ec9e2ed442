"""Fitness-landscape tools: bond distance, FDC and the big-valley test.

A landscape is said to have a big valley when its global optima sit close
together (mean pairwise bond distance well below n/2) and tour cost
correlates strongly with distance to the nearest optimum.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .tsp_core import EdgeKey, Tour, edge

DEFAULT_RHO = 0.5
DEFAULT_THETA = 0.5


class DegenerateDataError(ValueError):
    """Raised when a statistic is undefined for the given data."""


def _order(t) -> np.ndarray:
    return np.asarray(t.order if isinstance(t, Tour) else t, dtype=np.int64)


def _succ_pred(order: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    succ = np.empty_like(order)
    succ[order] = np.roll(order, -1)
    pred = np.empty_like(order)
    pred[order] = np.roll(order, 1)
    return succ, pred


def bond_distance(t1, t2) -> int:
    """Number of edges of ``t1`` that ``t2`` does not use."""
    o1, o2 = _order(t1), _order(t2)
    if o1.shape != o2.shape:
        raise ValueError(f"tours have different sizes: {len(o1)} vs {len(o2)}")
    succ2, pred2 = _succ_pred(o2)
    nxt = np.roll(o1, -1)
    shared = (succ2[o1] == nxt) | (pred2[o1] == nxt)
    return int(len(o1) - shared.sum())


def fdc(costs: Sequence[float], dists: Sequence[float]) -> float:
    """Fitness-distance correlation with population moments."""
    g = np.asarray(costs, dtype=np.float64)
    d = np.asarray(dists, dtype=np.float64)
    if g.shape != d.shape or g.ndim != 1:
        raise ValueError("costs and distances must be 1-d and of equal length")
    if len(g) < 2:
        raise DegenerateDataError("need at least two samples")
    gc = g - g.mean()
    dc = d - d.mean()
    sg = math.sqrt(float(np.dot(gc, gc)) / len(g))
    sd = math.sqrt(float(np.dot(dc, dc)) / len(d))
    if sg == 0.0 or sd == 0.0:
        raise DegenerateDataError("FDC is undefined for a constant list")
    r = float(np.dot(gc, dc)) / len(g) / (sg * sd)
    return max(-1.0, min(1.0, r))


def canonical(t) -> tuple[int, ...]:
    """Tour as a tuple starting at city 0, heading to its smaller neighbour."""
    o = _order(t)
    k = int(np.flatnonzero(o == 0)[0])
    o = np.roll(o, -k)
    if len(o) > 2 and o[1] > o[-1]:
        o = np.concatenate(([0], o[:0:-1]))
    return tuple(int(c) for c in o)


class OptimaPool:
    """Distinct tours sharing one optimal cost."""

    def __init__(self, cost: int | None = None, tours: Iterable = ()):
        self.cost = cost
        self._members: dict[tuple[int, ...], None] = {}
        for t in tours:
            self.add(t)

    def add(self, t, cost: int | None = None) -> bool:
        """Insert a tour; returns False if an equal tour is already present."""
        if cost is None and isinstance(t, Tour):
            cost = t.cost_g
        if cost is not None:
            if self.cost is None:
                self.cost = int(cost)
            elif cost != self.cost:
                raise ValueError(f"tour cost {cost} differs from pool cost {self.cost}")
        key = canonical(t)
        if key in self._members:
            return False
        if self._members and len(key) != len(next(iter(self._members))):
            raise ValueError("tour size does not match the pool")
        self._members[key] = None
        return True

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(self._members)

    def __contains__(self, t) -> bool:
        return canonical(t) in self._members

    def edge_union(self) -> set[EdgeKey]:
        edges = set()
        for m in self._members:
            edges.update(edge(a, b) for a, b in zip(m, m[1:] + m[:1]))
        return edges

    def save(self, path: str | Path) -> None:
        lines = [f"# cost {self.cost}"] + [" ".join(map(str, m)) for m in self._members]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "OptimaPool":
        pool = cls()
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "cost" and parts[1] != "None":
                    pool.cost = int(parts[1])
                continue
            pool.add([int(x) for x in line.split()])
        return pool

    @classmethod
    def load_bundled(cls, name: str) -> "OptimaPool":
        """The shipped optima of a bundled instance (``data/<name>.optima``)."""
        path = resources.files("glstsp").joinpath("data", f"{name}.optima")
        if not path.is_file():
            raise ValueError(f"no bundled optima for {name!r}")
        return cls.load(path)


def nearest_optimum_distance(t, pool: OptimaPool) -> int:
    if not len(pool):
        raise ValueError("optima pool is empty")
    o = _order(t)
    return min(bond_distance(o, np.asarray(m)) for m in pool)


@dataclass(frozen=True)
class PoolStats:
    count: int
    min: int | None
    mean: float | None
    max: int | None


def optima_pool_stats(pool: OptimaPool) -> PoolStats:
    """Pairwise bond-distance summary; distances are None for a single optimum."""
    members = [np.asarray(m) for m in pool]
    if not members:
        raise ValueError("optima pool is empty")
    if len(members) == 1:
        return PoolStats(1, None, None, None)
    d = [bond_distance(a, b) for a, b in combinations(members, 2)]
    return PoolStats(len(members), min(d), sum(d) / len(d), max(d))


@dataclass(frozen=True)
class TrajectorySample:
    run_id: int | str
    iteration: int
    cost: int
    tour: tuple[int, ...]


class TrajectoryRecorder:
    """Collects the best tour each time a run improves it."""

    def __init__(self, run_id):
        self.run_id = run_id
        self.samples: list[TrajectorySample] = []

    def __call__(self, state, iteration: int, cost: int) -> None:
        order = state.best_tour().order
        self.samples.append(TrajectorySample(self.run_id, int(iteration), int(cost),
                                             tuple(order.tolist())))


def write_corpus(path: str | Path, samples: Iterable[TrajectorySample], append=False) -> int:
    """Write ``run_id,iteration,cost,tour`` lines; returns the number written."""
    count = 0
    with open(path, "a" if append else "w") as fh:
        for s in samples:
            fh.write(f"{s.run_id},{s.iteration},{s.cost},{' '.join(map(str, s.tour))}\n")
            count += 1
    return count


def read_corpus(path: str | Path) -> list[TrajectorySample]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            run_id, it, cost, tour = line.split(",", 3)
            run = int(run_id) if run_id.lstrip("-").isdigit() else run_id
            out.append(TrajectorySample(run, int(it), int(cost),
                                        tuple(int(c) for c in tour.split())))
    return out


def scatter_rows(samples: Iterable[TrajectorySample], pool: OptimaPool,
                 optimal_cost: int | None = None) -> list[tuple[int, float]]:
    """(nearest-optimum distance, excess percent) for each sample."""
    opt = pool.cost if optimal_cost is None else optimal_cost
    if opt is None:
        raise ValueError("optimal cost unknown")
    return [(nearest_optimum_distance(s.tour, pool), (s.cost - opt) / opt * 100.0)
            for s in samples]


def write_scatter(path: str | Path, rows: Iterable[tuple[int, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["distance", "excess_percent"])
        for d, e in rows:
            w.writerow([d, f"{e:.6f}"])


@dataclass(frozen=True)
class BigValleyReport:
    req1: bool
    req2: bool
    fdc: float
    mean_opt_dist: float | None
    n: int
    rho: float
    theta: float

    @property
    def big_valley(self) -> bool:
        return self.req1 and self.req2


def big_valley_check(pool: OptimaPool | PoolStats, corpus, n: int, rho: float = DEFAULT_RHO,
                     theta: float = DEFAULT_THETA) -> BigValleyReport:
    """Test the clustering and correlation requirements of a big valley.

    ``corpus`` holds trajectory samples (distances are measured against
    ``pool``) or ready-made ``(cost, distance)`` pairs. Clustering holds
    when the mean pairwise optimum distance is below ``rho * n / 2`` and
    trivially for a single optimum; correlation holds when FDC >= ``theta``.
    """
    stats = pool if isinstance(pool, PoolStats) else optima_pool_stats(pool)
    pairs = []
    for item in corpus:
        if isinstance(item, TrajectorySample):
            if isinstance(pool, PoolStats):
                raise ValueError("samples need a pool of tours to measure distances")
            pairs.append((item.cost, nearest_optimum_distance(item.tour, pool)))
        else:
            pairs.append(tuple(item))
    if not pairs:
        raise DegenerateDataError("empty corpus")
    costs, dists = zip(*pairs)
    r = fdc(costs, dists)
    req1 = stats.count == 1 or stats.mean < rho * n / 2
    return BigValleyReport(req1, r >= theta, r, stats.mean, n, rho, theta)
