"""Guided Local Search for the symmetric TSP.

The outer loop alternates a 2-Opt/FLS local search on the augmented
objective with one penalization event. The inner loops run compiled; this
module owns configuration, the live search state and the Python-side
driver (stopping rules, hooks, time-based switches).
"""
from __future__ import annotations

import time
from array import array
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from . import _engine as eng
from .penalties import PenaltyStore, edge_table
from .tsp_core import EdgeKey, Instance, Tour, edge, nearest_neighbor_tour, random_tour

__all__ = [
    "PenaltyStore", "Stop", "GlsConfig", "SearchState", "compute_lambda", "utility",
    "penalize", "penalize_tour", "run_gls", "drive",
]

CHUNK = 4096
CHECKPOINT_STRIDE = 1000


@dataclass(frozen=True)
class Stop:
    """Stopping rule: the run ends at whichever limit is hit first."""

    max_iterations: int | None = None
    time_limit: float | None = None
    target_cost: int | None = None

    def __post_init__(self):
        if self.max_iterations is None and self.time_limit is None and self.target_cost is None:
            raise ValueError("at least one stopping limit is required")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.time_limit is not None and self.time_limit < 0:
            raise ValueError("time_limit must be >= 0")

    @property
    def zero_budget(self) -> bool:
        return self.max_iterations == 0 or self.time_limit == 0


@dataclass(frozen=True)
class GlsConfig:
    lambda_coefficient: float | Fraction = 0.3
    stop: Stop = field(default_factory=lambda: Stop(max_iterations=10_000))
    seed: int = 0
    start: str = "random"  # or "nn"

    def __post_init__(self):
        if _as_fraction(self.lambda_coefficient) <= 0:
            raise ValueError("lambda_coefficient must be positive")
        if self.start not in ("random", "nn"):
            raise ValueError(f"unknown start {self.start!r}; expected 'random' or 'nn'")


def _as_fraction(x) -> Fraction:
    # str() keeps 0.3 as 3/10 rather than its binary expansion
    return x if isinstance(x, Fraction) else Fraction(str(x))


def compute_lambda(first_local_opt_cost: int, n: int, coeff=0.3) -> Fraction:
    """Penalty weight ``coeff * cost / n`` as an exact rational."""
    if first_local_opt_cost <= 0 or n < 3:
        raise ValueError("need a positive local-optimum cost and n >= 3")
    coeff = _as_fraction(coeff)
    if coeff <= 0:
        raise ValueError("coefficient must be positive")
    return coeff * first_local_opt_cost / n


def utility(e, in_solution: bool, c: int, p: int) -> Fraction:
    """Penalization utility of an edge: c / (1 + p) if it is in the tour, else 0."""
    if not in_solution:
        return Fraction(0)
    return Fraction(c, 1 + p)


def start_tour(inst: Instance, cfg: GlsConfig) -> Tour:
    if cfg.start == "nn":
        start = int(np.random.default_rng(cfg.seed).integers(inst.n))
        return nearest_neighbor_tour(inst, start)
    return random_tour(inst, cfg.seed)


class SearchState:
    """Live search: current tour, best tour, penalties, lambda and counters.

    The numpy buffers are shared with the compiled kernels; ``current`` is a
    view on them and is mutated as the search advances.
    """

    def __init__(self, inst: Instance, start: Tour, coeff=0.3, target_cost: int | None = None,
                 good_edges: Iterable | None = None):
        n = inst.n
        self.inst = inst
        self.current = start.copy()
        self._best = start.order.copy()
        self.penalties = PenaltyStore(n)
        coeff = _as_fraction(coeff)
        st = np.zeros(eng.STATE_SIZE, dtype=np.int64)
        st[eng.N] = n
        st[eng.CUR_G] = start.cost_g
        st[eng.BEST_G] = start.cost_g
        st[eng.CUR_IS_BEST] = 1
        st[eng.LAM_NUM], st[eng.LAM_DEN] = 0, 1
        st[eng.COEF_NUM], st[eng.COEF_DEN] = coeff.numerator, coeff.denominator
        st[eng.TARGET] = -1 if target_cost is None else int(target_cost)
        st[eng.EB_START] = -1
        st[eng.W_NUM], st[eng.W_DEN] = 1, 1
        st[eng.PERIOD] = 1
        st[eng.Q_SIZE] = n
        self.st = st
        self.active = np.ones(n, dtype=np.bool_)
        self.queue = np.arange(n, dtype=np.int32)
        self.elite_next = np.full(n, -1, dtype=np.int32)
        self.elite_prev = np.full(n, -1, dtype=np.int32)
        self._util_num = np.zeros(n, dtype=np.int64)
        self._util_den = np.zeros(n, dtype=np.int64)
        self._penalized = np.zeros(n, dtype=np.int64)
        self._iter_best = np.zeros(CHUNK, dtype=np.int64)
        if good_edges is None:
            self.gkeys = np.zeros(0, dtype=np.int64)
            self.gvals = np.zeros(0, dtype=np.int32)
            self.good_edges = None
        else:
            self.good_edges = frozenset(edge(*e) for e in good_edges)
            self.gkeys, self.gvals = edge_table(n, self.good_edges)
        self.start_cost = start.cost_g
        self.elapsed = 0.0
        self.best_time = 0.0
        self.stop_reason = "iterations"

    # --- counters and views ------------------------------------------------
    @property
    def iteration(self) -> int:
        return int(self.st[eng.ITER])

    @property
    def lam(self) -> Fraction:
        return Fraction(int(self.st[eng.LAM_NUM]), int(self.st[eng.LAM_DEN]))

    @property
    def lambda_set(self) -> bool:
        return bool(self.st[eng.LAM_SET])

    @property
    def best_cost(self) -> int:
        return int(self.st[eng.BEST_G])

    @property
    def best_iteration(self) -> int:
        return int(self.st[eng.BEST_ITER])

    @property
    def good_penalty(self) -> int:
        return int(self.st[eng.GOOD_TOTAL])

    @property
    def current_penalty(self) -> int:
        """Sum of penalties over the current tour's edges (tracked incrementally)."""
        return int(self.st[eng.CUR_P])

    @property
    def moves(self) -> int:
        return int(self.st[eng.MOVES])

    def best_tour(self) -> Tour:
        eng.sync_best(self.current.order, self._best, self.st)
        return Tour.from_order(self.inst, self._best.copy())

    def last_penalized(self) -> set[EdgeKey]:
        n = self.inst.n
        keys = self._penalized[:int(self.st[eng.LAST_PEN])].tolist()
        return {EdgeKey(k // n, k % n) for k in keys}

    def h_minus_g(self) -> Fraction:
        return self.lam * self.current_penalty

    def _sync(self) -> None:
        self.current.cost_g = int(self.st[eng.CUR_G])
        self.penalties.count = int(self.st[eng.PEN_COUNT])
        self.penalties.total = int(self.st[eng.PEN_TOTAL])

    # --- elite-biased mode ---------------------------------------------------
    def configure_elite(self, w, period: int, eb_start: int | None) -> None:
        """Enable biased utilities from iteration ``eb_start`` (None = not yet)."""
        w = _as_fraction(w)
        if w <= 0 or period < 1:
            raise ValueError("w must be positive and period >= 1")
        self.st[eng.W_NUM], self.st[eng.W_DEN] = w.numerator, w.denominator
        self.st[eng.PERIOD] = period
        self.st[eng.EB_START] = -1 if eb_start is None else max(1, int(eb_start))

    @property
    def elite_start(self) -> int | None:
        v = int(self.st[eng.EB_START])
        return None if v < 0 else v

    def start_elite_now(self) -> None:
        """Switch biased utilities on from the next iteration."""
        if self.st[eng.EB_START] < 0:
            self.st[eng.EB_START] = self.iteration + 1

    def elite_edges(self) -> set[EdgeKey]:
        if not self.st[eng.ELITE_SET]:
            return set()
        return {edge(a, int(b)) for a, b in enumerate(self.elite_next.tolist())}

    # --- advancing -----------------------------------------------------------
    def step(self, iterations: int = 1, deadline: float = 0.0,
             stop_on_improve: bool = False) -> tuple[int, np.ndarray]:
        """Run up to ``iterations`` outer iterations in compiled code.

        Returns the engine exit code and the best cost after each completed
        iteration. ``deadline`` is an absolute ``time.perf_counter`` value,
        0 for none.
        """
        out = []
        left = int(iterations)
        inst = self.inst
        while left > 0:
            chunk = min(left, CHUNK)
            code, done = eng.run_iterations(
                self.current.order, self.current.position, self._best, inst.matrix,
                inst.kernel_coords, inst.rule_code, inst.neighbors,
                self.penalties.keys, self.penalties.vals, self.gkeys, self.gvals,
                self.elite_next, self.elite_prev, self.active, self.queue, self.st,
                self._util_num, self._util_den, self._penalized, self._iter_best,
                chunk, float(deadline), bool(stop_on_improve))
            out.append(self._iter_best[:done].copy())
            left -= done
            self._sync()
            if code == eng.NEED_GROW:
                self.penalties.ensure_capacity(inst.n)
                continue
            if code != eng.ITERS_DONE:
                break
        else:
            code = eng.ITERS_DONE
        trace = np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
        return code, trace


Hook = Callable[[SearchState], None]

_compiled = False


def compile_kernels() -> None:
    """Trigger JIT compilation on a toy instance so run budgets exclude it."""
    global _compiled
    if _compiled:
        return
    from .tsp_core import Instance as _Inst
    coords = np.array([[0, 0], [0, 10], [10, 10], [10, 0], [5, 3], [2, 7]], dtype=float)
    inst = _Inst("warmup", coords, "EUC_2D")
    state = SearchState(inst, random_tour(inst, 0), good_edges=[(0, 1)])
    state.configure_elite(2, 1, 1)
    state.step(5, deadline=time.perf_counter() + 60.0, stop_on_improve=True)
    _compiled = True


def drive(state: SearchState, stop: Stop, *, warmup_seconds: float | None = None,
          on_improve: Callable[[SearchState, int, int], None] | None = None,
          on_checkpoint: Hook | None = None, checkpoint_stride: int = CHECKPOINT_STRIDE,
          trace: list | None = None) -> SearchState:
    """Advance ``state`` until ``stop`` fires.

    ``on_improve(state, iteration, cost)`` sees every iteration in which the
    best tour improved. ``on_checkpoint(state)`` runs after every
    ``checkpoint_stride`` iterations. ``trace`` (a list) receives the
    best-so-far cost after each iteration. With ``warmup_seconds`` set, the
    elite-biased utilities are switched on once that much time has passed.
    """
    compile_kernels()
    t0 = time.perf_counter()
    if stop.target_cost is not None:
        state.st[eng.TARGET] = int(stop.target_cost)
    if stop.zero_budget:
        state.stop_reason = "budget"
        return state
    if stop.target_cost is not None and state.best_cost <= stop.target_cost:
        state.stop_reason = "target"
        return state
    deadline = 0.0 if stop.time_limit is None else t0 + stop.time_limit
    switch_at = None
    if warmup_seconds is not None and state.elite_start is None:
        if warmup_seconds <= 0:
            state.start_elite_now()
        else:
            switch_at = t0 + warmup_seconds
    collected = array("q") if trace is not None else None
    max_iters = stop.max_iterations
    while True:
        if max_iters is not None and state.iteration >= max_iters:
            state.stop_reason = "iterations"
            break
        budget = CHUNK if max_iters is None else min(CHUNK, max_iters - state.iteration)
        if on_checkpoint is not None:
            budget = min(budget, checkpoint_stride - state.iteration % checkpoint_stride)
        chunk_deadline = deadline
        if switch_at is not None:
            chunk_deadline = switch_at if deadline == 0.0 else min(deadline, switch_at)
        before = state.best_cost
        code, costs = state.step(budget, chunk_deadline, stop_on_improve=on_improve is not None)
        if collected is not None:
            collected.extend(costs.tolist())
        if state.best_cost < before:
            state.best_time = time.perf_counter() - t0
            if on_improve is not None:
                on_improve(state, state.best_iteration, state.best_cost)
        if on_checkpoint is not None and len(costs) and state.iteration % checkpoint_stride == 0:
            on_checkpoint(state)
        if code == eng.TARGET_REACHED:
            state.stop_reason = "target"
            break
        if code == eng.TIME_UP:
            now = time.perf_counter()
            if switch_at is not None and now >= switch_at:
                state.start_elite_now()
                switch_at = None
                if deadline == 0.0 or now < deadline:
                    continue
            state.stop_reason = "time"
            break
    state.elapsed += time.perf_counter() - t0
    if trace is not None:
        trace.extend(collected)
    return state


def run_gls(inst: Instance, cfg: GlsConfig, *, start: Tour | None = None,
            **hooks) -> tuple[Tour, SearchState]:
    """Plain GLS from a random or nearest-neighbour start; returns (best, state)."""
    if start is None:
        start = start_tour(inst, cfg)
    state = SearchState(inst, start, cfg.lambda_coefficient, cfg.stop.target_cost,
                        good_edges=hooks.pop("good_edges", None))
    drive(state, cfg.stop, **hooks)
    return state.best_tour(), state


def penalize(state, local_opt: Tour, util_fn: Callable) -> set[EdgeKey]:
    """Add one penalty to every edge of ``local_opt`` with maximal utility.

    ``state`` needs ``inst`` and ``penalties``; ``util_fn(edge, in_solution,
    c, p)`` scores one edge. All ties at the maximum are penalized. This is
    the readable reference for the compiled penalization step.
    """
    inst = state.inst
    pens = state.penalties
    scored = []
    for a, b in local_opt.edges():
        e = edge(a, b)
        scored.append((util_fn(e, True, inst.distance(a, b), pens[e]), e))
    top = max(u for u, _ in scored)
    chosen = {e for u, e in scored if u == top}
    for e in chosen:
        pens.increment(e)
    return chosen


def penalize_tour(inst: Instance, tour: Tour, penalties: PenaltyStore,
                  elite_edges: Iterable | None = None, w=2) -> set[EdgeKey]:
    """Compiled penalization of ``tour`` against ``penalties`` (updated in place).

    With ``elite_edges`` the biased utility is used: edges outside the elite
    tour count ``w`` times as much.
    """
    n = inst.n
    penalties.ensure_capacity(n)
    st = np.zeros(eng.STATE_SIZE, dtype=np.int64)
    st[eng.N] = n
    st[eng.PEN_COUNT] = penalties.count
    st[eng.PEN_TOTAL] = penalties.total
    w = _as_fraction(w)
    st[eng.W_NUM], st[eng.W_DEN] = w.numerator, w.denominator
    nxt = np.full(n, -1, dtype=np.int32)
    prv = np.full(n, -1, dtype=np.int32)
    for a, b in (elite_edges or ()):
        # elite membership is looked up through neighbour arrays; two slots per city
        for x, y in ((a, b), (b, a)):
            if nxt[x] < 0:
                nxt[x] = y
            else:
                prv[x] = y
    penalized = np.zeros(n, dtype=np.int64)
    eng.penalize(tour.order, inst.matrix, inst.kernel_coords, inst.rule_code, penalties.keys,
                 penalties.vals, np.zeros(0, np.int64), np.zeros(0, np.int32), nxt, prv,
                 np.zeros(n, np.bool_), np.zeros(n, np.int32), st, elite_edges is not None,
                 np.zeros(n, np.int64), np.zeros(n, np.int64), penalized)
    penalties.count = int(st[eng.PEN_COUNT])
    penalties.total = int(st[eng.PEN_TOTAL])
    return {EdgeKey(k // n, k % n) for k in penalized[:int(st[eng.LAST_PEN])].tolist()}
