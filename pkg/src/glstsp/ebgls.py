"""Elite-biased GLS: penalties steer away from edges of the best tour found.

After a warm-up phase of plain GLS, an edge of the local optimum that is
not part of the elite tour has its utility multiplied by ``w``, so the
elite's edges are penalized less often. The elite is the best tour with
respect to the true cost, re-copied every ``elite_update_period``
iterations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .gls import GlsConfig, SearchState, _as_fraction, drive, start_tour, utility
from .tsp_core import EdgeKey, Instance, Tour, edges_of

DEFAULT_WARMUP_ITERATIONS = 10_000
PROTOCOL_SIZE_THRESHOLD = 1000


@dataclass(frozen=True)
class Warmup:
    """How long plain GLS runs before the elite bias switches on.

    Exactly one of ``iterations``, ``seconds`` or ``fraction`` (of the time
    limit) is set. ``Warmup.parse`` also accepts ``auto``, the
    benchmark-protocol rule: no warm-up below 1000 cities, otherwise
    ``floor(T / 10)`` seconds of a ``T``-second budget.
    """

    iterations: int | None = None
    seconds: float | None = None
    fraction: float | None = None

    def __post_init__(self):
        given = [v for v in (self.iterations, self.seconds, self.fraction) if v is not None]
        if len(given) != 1:
            raise ValueError("warm-up needs exactly one of iterations, seconds, fraction")
        if given[0] < 0:
            raise ValueError("warm-up must be non-negative")
        if self.fraction is not None and self.fraction > 1:
            raise ValueError("warm-up fraction must be in [0, 1]")

    @classmethod
    def parse(cls, text: str, n: int | None = None, time_limit: float | None = None) -> "Warmup":
        """Read ``500``, ``500it``, ``5s``, ``10%``, ``0.1T`` or ``auto``."""
        t = text.strip().lower()
        if t == "auto":
            return cls.protocol(n, time_limit)
        if t.endswith("it"):
            return cls(iterations=int(t[:-2]))
        if t.endswith("%"):
            return cls(fraction=float(t[:-1]) / 100)
        if t.endswith("t"):
            return cls(fraction=float(t[:-1]))
        if t.endswith("s"):
            return cls(seconds=float(t[:-1]))
        return cls(iterations=int(t))

    @classmethod
    def protocol(cls, n: int | None, time_limit: float | None) -> "Warmup":
        if n is None:
            raise ValueError("auto warm-up needs the instance size")
        if n < PROTOCOL_SIZE_THRESHOLD:
            return cls(iterations=0)
        if time_limit is None:
            return cls(iterations=DEFAULT_WARMUP_ITERATIONS)
        return cls(seconds=float(math.floor(time_limit / 10)))

    def resolve_seconds(self, time_limit: float | None) -> float | None:
        if self.seconds is not None:
            return self.seconds
        if self.fraction is not None:
            if time_limit is None:
                raise ValueError("a fractional warm-up needs a time limit")
            return self.fraction * time_limit
        return None

    def __str__(self) -> str:
        if self.iterations is not None:
            return f"{self.iterations}it"
        if self.seconds is not None:
            return f"{self.seconds:g}s"
        return f"{self.fraction:g}T"


@dataclass(frozen=True)
class EbglsConfig:
    base: GlsConfig = field(default_factory=GlsConfig)
    w: float | Fraction = 2
    warmup: Warmup = field(default_factory=lambda: Warmup(iterations=DEFAULT_WARMUP_ITERATIONS))
    elite_update_period: int = 100
    allow_degenerate_w: bool = False  # w = 1 reproduces plain GLS; for testing

    def __post_init__(self):
        w = _as_fraction(self.w)
        if w < 1 or (w == 1 and not self.allow_degenerate_w):
            raise ValueError("w must be greater than 1")
        if self.elite_update_period < 1:
            raise ValueError("elite_update_period must be >= 1")


def utility_eb(e, in_solution: bool, c: int, p: int, in_elite: bool, w=2) -> Fraction:
    """Biased utility: c / (1 + p), times ``w`` when the edge is not in the elite."""
    u = utility(e, in_solution, c, p)
    return u if in_elite else u * _as_fraction(w)


@dataclass
class EliteState:
    """Edge set and cost of the elite tour plus the iteration of its last copy."""

    elite_edges: frozenset[EdgeKey] = frozenset()
    elite_cost: int | None = None
    last_refresh_iteration: int | None = None

    @classmethod
    def of(cls, state: SearchState) -> "EliteState":
        """Snapshot the elite held by a running search."""
        from . import _engine as eng
        if not state.st[eng.ELITE_SET]:
            return cls()
        return cls(frozenset(state.elite_edges()), int(state.st[eng.ELITE_COST]),
                   int(state.st[eng.LAST_REFRESH]))


def refresh_elite(best: Tour, elite: EliteState, iteration: int, period: int = 100) -> bool:
    """Copy ``best`` into ``elite`` if ``period`` iterations have passed since the last copy.

    An elite that was never set is always filled. Returns True when the
    elite was replaced.
    """
    if elite.last_refresh_iteration is not None and iteration - elite.last_refresh_iteration < period:
        return False
    elite.elite_edges = frozenset(edges_of(best))
    elite.elite_cost = best.cost_g
    elite.last_refresh_iteration = iteration
    return True


def prepare(state: SearchState, cfg: EbglsConfig) -> float | None:
    """Configure the elite bias on ``state``; return a time warm-up in seconds, if any."""
    seconds = cfg.warmup.resolve_seconds(cfg.base.stop.time_limit)
    eb_start = None if seconds is not None else cfg.warmup.iterations + 1
    state.configure_elite(cfg.w, cfg.elite_update_period, eb_start)
    return seconds


def run_ebgls(inst: Instance, cfg: EbglsConfig, *, start: Tour | None = None,
              **hooks) -> tuple[Tour, SearchState]:
    """GLS with elite-biased penalization after the warm-up; returns (best, state)."""
    base = cfg.base
    if start is None:
        start = start_tour(inst, base)
    state = SearchState(inst, start, base.lambda_coefficient, base.stop.target_cost,
                        good_edges=hooks.pop("good_edges", None))
    seconds = prepare(state, cfg)
    drive(state, base.stop, warmup_seconds=seconds, **hooks)
    return state.best_tour(), state
