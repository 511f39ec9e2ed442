"""2-Opt local search with Fast Local Search activation bits.

The search is guided by an augmented objective
``h(s) = g(s) + lam * sum of penalties of the edges in s``; with ``lam = 0``
or no penalties it is plain 2-Opt on the tour length.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from . import _engine as eng
from .penalties import PenaltyStore
from .tsp_core import Instance, Tour, edge, tour_cost


@dataclass
class GuideFunction:
    """Augmented objective over an instance's distances."""

    inst: Instance
    lam: Fraction = Fraction(0)
    penalties: PenaltyStore | None = None

    def __post_init__(self):
        self.lam = Fraction(self.lam)
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.penalties is None:
            self.penalties = PenaltyStore(self.inst.n)

    def penalty_sum(self, order) -> int:
        order = np.asarray(order)
        nxt = np.roll(order, -1)
        return sum(self.penalties.get(a, b) for a, b in zip(order.tolist(), nxt.tolist()))

    def evaluate(self, order) -> Fraction:
        order = order.order if isinstance(order, Tour) else order
        return tour_cost(self.inst, order) + self.lam * self.penalty_sum(order)


class ActivationBits:
    """One FLS activation bit per city."""

    def __init__(self, n: int, value: bool = True):
        self.bits = np.full(n, value, dtype=np.bool_)

    def __getitem__(self, city: int) -> bool:
        return bool(self.bits[city])

    def set(self, city: int) -> None:
        self.bits[city] = True

    def any(self) -> bool:
        return bool(self.bits.any())

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class TwoOptMove:
    """Remove the tour edges leaving positions ``i`` and ``j``.

    The edges (order[i], order[i+1]) and (order[j], order[j+1]) are replaced
    by (order[i], order[j]) and (order[i+1], order[j+1]).
    """

    i: int
    j: int

    def cities(self, tour: Tour) -> tuple[int, int]:
        n = tour.n
        i, j = self.i % n, self.j % n
        if i == j or (i + 1) % n == j or (j + 1) % n == i:
            raise ValueError(f"positions {self.i}, {self.j} give adjacent edges (no-op move)")
        return int(tour.order[i]), int(tour.order[j])


def move_delta(inst: Instance, tour: Tour, move: TwoOptMove,
               guide: GuideFunction) -> tuple[int, Fraction]:
    """(delta_g, delta_h) of applying ``move`` to ``tour``."""
    x, y = move.cities(tour)
    dg, dp = eng.move_delta_parts(tour.order, tour.position, inst.matrix, inst.kernel_coords,
                                  inst.rule_code, guide.penalties.keys, guide.penalties.vals,
                                  inst.n, x, y)
    return int(dg), dg + guide.lam * int(dp)


def apply_move(inst: Instance, tour: Tour, move: TwoOptMove) -> Tour:
    """Apply ``move`` in place (segment reversal) and update the cached cost."""
    x, y = move.cities(tour)
    dg, _ = eng.move_delta_parts(tour.order, tour.position, inst.matrix, inst.kernel_coords,
                                 inst.rule_code, np.full(16, eng.EMPTY, np.int64),
                                 np.zeros(16, np.int32), inst.n, x, y)
    eng.apply_2opt(tour.order, tour.position, inst.n, x, y)
    tour.cost_g += int(dg)
    return tour


@dataclass
class LocalSearchStats:
    moves: int = 0
    scans: int = 0


def _engine_state(tour: Tour, lam: Fraction, n: int) -> np.ndarray:
    st = np.zeros(eng.STATE_SIZE, dtype=np.int64)
    st[eng.N] = n
    st[eng.CUR_G] = tour.cost_g
    st[eng.BEST_G] = np.iinfo(np.int64).max
    st[eng.TARGET] = -1
    st[eng.LAM_NUM] = lam.numerator
    st[eng.LAM_DEN] = lam.denominator
    return st


def local_search_2opt_fls(tour: Tour, guide: GuideFunction, bits: ActivationBits,
                          neighbor_lists: np.ndarray | None = None,
                          stats: LocalSearchStats | None = None,
                          complete: bool = True) -> Tour:
    """First-improvement 2-Opt under ``guide`` until every bit is off.

    Active cities are processed from a FIFO queue seeded in ascending city
    order. A city is rescanned after each improving move it triggers and
    switched off once its sub-neighbourhood holds no improving move; the
    four endpoints of every applied move are re-activated. With
    ``complete`` (the default) a final sweep over all cities confirms that
    no improving candidate move is left. ``tour`` is modified in place and
    returned.
    """
    inst = guide.inst
    n = inst.n
    nbrs = inst.neighbors if neighbor_lists is None else np.ascontiguousarray(
        neighbor_lists, dtype=np.int32)
    st = _engine_state(tour, guide.lam, n)
    active = bits.bits
    queue = np.zeros(n, dtype=np.int32)
    seeds = np.flatnonzero(active).astype(np.int32)
    queue[:len(seeds)] = seeds
    st[eng.Q_SIZE] = len(seeds)
    scratch = tour.order.copy()
    args = (tour.order, tour.position, scratch, inst.matrix, inst.kernel_coords,
            inst.rule_code, nbrs, guide.penalties.keys, guide.penalties.vals, active, queue, st)
    if complete:
        eng.local_search_complete(*args)
    else:
        eng.local_search(*args, 0.0)
    tour.cost_g = int(st[eng.CUR_G])
    if stats is not None:
        stats.moves += int(st[eng.MOVES])
        stats.scans += int(st[eng.SCANS])
    return tour


def activate_penalized(bits: ActivationBits, penalized_edges: Iterable) -> None:
    """Switch on the bits of both endpoints of every penalized edge."""
    for e in penalized_edges:
        a, b = edge(*e)
        bits.set(a)
        bits.set(b)


def improving_moves(inst: Instance, tour: Tour, guide: GuideFunction,
                    neighbor_lists: np.ndarray | None = None) -> list[tuple[int, int]]:
    """Exhaustively list candidate moves (x, y) that strictly decrease h.

    A move (x, y) removes (x, succ x), (y, succ y). Candidates are the
    successor and predecessor moves introducing an edge (a, c) with c in
    a's list, for every city a.
    """
    nbrs = inst.neighbors if neighbor_lists is None else neighbor_lists
    found = []
    for a in range(inst.n):
        for c in nbrs[a]:
            c = int(c)
            for x, y in ((a, c), (tour.pred(a), tour.pred(c))):
                if x == y or tour.succ(x) == y or tour.succ(y) == x:
                    continue
                i, j = int(tour.position[x]), int(tour.position[y])
                _, dh = move_delta(inst, tour, TwoOptMove(i, j), guide)
                if dh < 0:
                    found.append((x, y))
    return found
