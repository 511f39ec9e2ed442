"""Run metrics and the two-sample comparison used in benchmark tables."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .tsp_core import edge

ALPHA = 0.05
EXACT_BELOW = 8  # smaller samples get the exact null distribution
NOT_APPLICABLE = "-"

A_WINS = "A_wins"
B_WINS = "B_wins"
INCOMPARABLE = "incomparable"


def excess(best_cost: int, optimal_cost: int) -> float:
    """Percent gap of ``best_cost`` above ``optimal_cost``."""
    if optimal_cost <= 0:
        raise ValueError("optimal cost must be positive")
    if best_cost < optimal_cost:
        raise ValueError(f"cost {best_cost} beats the registered optimum {optimal_cost}; "
                         "the optimum registry is wrong")
    return (best_cost - optimal_cost) / optimal_cost * 100.0


def _is_rational(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def average_series(values: Sequence[Sequence]) -> list:
    """Per-checkpoint mean over runs (rows are runs, columns checkpoints).

    Integer and Fraction data give exact Fraction means; anything else is
    averaged in floating point with ``math.fsum``.
    """
    if not values:
        raise ValueError("no runs")
    width = len(values[0])
    if any(len(row) != width for row in values):
        raise ValueError("runs have different lengths; pad finished runs first")
    out = []
    for col in zip(*values):
        if all(_is_rational(v) for v in col):
            out.append(Fraction(sum(col), len(col)))
        else:
            out.append(math.fsum(col) / len(col))
    return out


def undesirable_ratio(penalties, good_edges: Iterable) -> Fraction:
    """Share of all penalty mass sitting on ``good_edges``."""
    total = penalties.total_penalty
    if total <= 0:
        raise ValueError("no penalties have been applied")
    good = sum(penalties[edge(*e)] for e in set(edge(*e) for e in good_edges))
    return Fraction(good, total)


def incremental_ratio(good_before: int, total_before: int, good_after: int,
                      total_after: int) -> Fraction | None:
    """Undesirable share of the penalties added between two snapshots."""
    added = total_after - total_before
    if added < 0 or good_after < good_before:
        raise ValueError("penalty counters went backwards")
    if added == 0:
        return None
    return Fraction(good_after - good_before, added)


@dataclass
class Checkpoint:
    """One run's state at a checkpoint."""

    iteration: int
    best_cost: int
    distance: int  # bond distance of the best tour to the nearest optimum
    good_penalty: int
    total_penalty: int


@dataclass
class MetricSeries:
    """Behaviour metrics over runs sampled every ``stride`` iterations.

    Runs that found an optimum before a checkpoint count as zero excess and
    zero distance there, and are left out of both penalty ratios.
    """

    optimal_cost: int
    stride: int = 1000
    runs: list[list[Checkpoint]] = field(default_factory=list)
    finished_at: list[int | None] = field(default_factory=list)

    def add_run(self, checkpoints: Sequence[Checkpoint], finished_at: int | None = None) -> None:
        its = [c.iteration for c in checkpoints]
        if its != [self.stride * (k + 1) for k in range(len(its))]:
            raise ValueError("checkpoints must sit at consecutive multiples of the stride")
        self.runs.append(list(checkpoints))
        self.finished_at.append(finished_at)

    @property
    def length(self) -> int:
        longest = max((len(r) for r in self.runs), default=0)
        for r, f in zip(self.runs, self.finished_at):
            if f is None:
                longest = max(longest, len(r))
            else:
                longest = max(longest, len(r), -(-f // self.stride))
        return longest

    def _done(self, i: int, k: int) -> bool:
        f = self.finished_at[i]
        return f is not None and f <= self.stride * (k + 1)

    def _cell(self, i: int, k: int) -> Checkpoint | None:
        run = self.runs[i]
        if k < len(run):
            return run[k]
        return None

    def excess_matrix(self) -> list[list[Fraction]]:
        rows = []
        for i, run in enumerate(self.runs):
            row = []
            for k in range(self.length):
                c = self._cell(i, k)
                if self._done(i, k) or c is None:
                    if not self._done(i, k):
                        raise ValueError(f"run {i} stopped before checkpoint {k + 1} "
                                         "without reaching the optimum")
                    row.append(Fraction(0))
                else:
                    row.append(Fraction(100 * (c.best_cost - self.optimal_cost),
                                        self.optimal_cost))
            rows.append(row)
        return rows

    def distance_matrix(self) -> list[list[int]]:
        rows = []
        for i in range(len(self.runs)):
            row = []
            for k in range(self.length):
                c = self._cell(i, k)
                row.append(0 if self._done(i, k) or c is None else c.distance)
            rows.append(row)
        return rows

    def mean_excess(self) -> list[Fraction]:
        return average_series(self.excess_matrix())

    def mean_distance(self) -> list[Fraction]:
        return average_series(self.distance_matrix())

    def _ratio_curve(self, per_run) -> list[Fraction | None]:
        out = []
        for k in range(self.length):
            vals = []
            for i in range(len(self.runs)):
                if self._done(i, k) or self._cell(i, k) is None:
                    continue
                v = per_run(i, k)
                if v is not None:
                    vals.append(v)
            out.append(Fraction(sum(vals), len(vals)) if vals else None)
        return out

    def mean_ratio(self) -> list[Fraction | None]:
        """Average undesirable-penalty ratio over unfinished runs."""
        def r(i, k):
            c = self._cell(i, k)
            return Fraction(c.good_penalty, c.total_penalty) if c.total_penalty else None
        return self._ratio_curve(r)

    def mean_incremental_ratio(self) -> list[Fraction | None]:
        """Average undesirable share of the penalties added within each window."""
        def r(i, k):
            c = self._cell(i, k)
            prev = self._cell(i, k - 1) if k else None
            g0, t0 = (prev.good_penalty, prev.total_penalty) if prev else (0, 0)
            return incremental_ratio(g0, t0, c.good_penalty, c.total_penalty)
        return self._ratio_curve(r)


# --- Mann-Whitney U -----------------------------------------------------------

@dataclass(frozen=True)
class UTest:
    u: float  # U statistic of the first sample
    p: float  # two-sided p-value
    exact: bool
    all_tied: bool


def _midranks(values: Sequence[float]) -> tuple[list[float], list[int]]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        r = (i + j + 2) / 2
        for k in range(i, j + 1):
            ranks[order[k]] = r
        ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


def _exact_two_sided(doubled: list[int], n_a: int, observed2: int) -> float:
    """P(|R - mu| >= |r - mu|) over all splits; R = doubled rank sum of n_a items."""
    # counts[k][s] = number of k-subsets with doubled rank sum s
    counts = [dict() for _ in range(n_a + 1)]
    counts[0][0] = 1
    for r in doubled:
        for k in range(n_a, 0, -1):
            src = counts[k - 1]
            dst = counts[k]
            for s, c in src.items():
                dst[s + r] = dst.get(s + r, 0) + c
    dist = counts[n_a]
    total = sum(dist.values())
    # work with 2*n*sum to keep the mean integral
    n = len(doubled)
    mu_scaled = n_a * sum(doubled)
    dev = abs(n * observed2 - mu_scaled)
    hits = sum(c for s, c in dist.items() if abs(n * s - mu_scaled) >= dev)
    return min(1.0, hits / total)


def mann_whitney_u(sample_a: Sequence[float], sample_b: Sequence[float]) -> UTest:
    """Two-sided Mann-Whitney U test with midranks for ties.

    Uses the exact permutation distribution when the smaller sample has
    fewer than 8 values, otherwise the normal approximation with
    tie-corrected variance and a continuity correction.
    """
    a = list(sample_a)
    b = list(sample_b)
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    n_a, n_b = len(a), len(b)
    n = n_a + n_b
    ranks, ties = _midranks(a + b)
    r_a = sum(ranks[:n_a])
    u = r_a - n_a * (n_a + 1) / 2
    all_tied = len(ties) == 1
    if all_tied:
        return UTest(u, 1.0, min(n_a, n_b) < EXACT_BELOW, True)
    if min(n_a, n_b) < EXACT_BELOW:
        doubled = [int(round(2 * r)) for r in ranks]
        p = _exact_two_sided(doubled, n_a, sum(doubled[:n_a]))
        return UTest(u, p, True, False)
    mu = n_a * n_b / 2
    tie_term = sum(t ** 3 - t for t in ties) / (n * (n - 1))
    var = n_a * n_b / 12 * ((n + 1) - tie_term)
    z = max(0.0, abs(u - mu) - 0.5) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2))
    return UTest(u, min(1.0, p), False, False)


# --- comparison table ----------------------------------------------------------

@dataclass(frozen=True)
class MetricTest:
    """Means of one lower-is-better metric for A and B with the test p-value.

    ``p`` is None when the metric could not be tested.
    """

    mean_a: float
    mean_b: float
    p: float | None

    def significant(self, alpha: float = ALPHA) -> bool:
        return self.p is not None and self.p < alpha

    def a_better(self, alpha: float = ALPHA) -> bool:
        return self.significant(alpha) and self.mean_a < self.mean_b

    def b_better(self, alpha: float = ALPHA) -> bool:
        return self.significant(alpha) and self.mean_b < self.mean_a


def dominance_verdict(success: tuple[int, int] | None, excess_test: MetricTest | None,
                      runtime_test: MetricTest | None, alpha: float = ALPHA) -> str:
    """Pareto-style verdict over success count, excess and runtime.

    A wins when it is not significantly worse on any metric and better on
    at least one. Success counts are compared as raw numbers.
    """
    a_better = b_better = 0
    if success is not None:
        a_better += success[0] > success[1]
        b_better += success[1] > success[0]
    for t in (excess_test, runtime_test):
        if t is not None:
            a_better += t.a_better(alpha)
            b_better += t.b_better(alpha)
    if a_better and not b_better:
        return A_WINS
    if b_better and not a_better:
        return B_WINS
    return INCOMPARABLE


def compare(values_a: Sequence[float], values_b: Sequence[float]) -> MetricTest:
    t = mann_whitney_u(values_a, values_b)
    mean_a = math.fsum(values_a) / len(values_a)
    mean_b = math.fsum(values_b) / len(values_b)
    return MetricTest(mean_a, mean_b, None if t.all_tied else t.p)


@dataclass(frozen=True)
class ComparisonReport:
    """One instance's row: algorithm A against algorithm B."""

    instance: str
    max_runtime: float
    runs: int
    success: tuple[int, int] | None
    excess: MetricTest | None
    runtime: MetricTest
    verdict: str


def build_report(instance: str, max_runtime: float, costs: tuple[Sequence[int], Sequence[int]],
                 runtimes: tuple[Sequence[float], Sequence[float]],
                 optimal_cost: int | None) -> ComparisonReport:
    """Aggregate paired run results of A and B into a table row.

    Runs that miss the optimum must already carry the full time limit as
    their runtime. Without a known optimum the success and excess columns
    are left empty.
    """
    ca, cb = costs
    if len(ca) != len(cb):
        raise ValueError("both algorithms need the same number of runs")
    runtime = compare(*runtimes)
    if optimal_cost is None:
        succ = ex = None
    else:
        succ = (sum(c == optimal_cost for c in ca), sum(c == optimal_cost for c in cb))
        ex = compare([excess(c, optimal_cost) for c in ca], [excess(c, optimal_cost) for c in cb])
    return ComparisonReport(instance, max_runtime, len(ca), succ, ex, runtime,
                            dominance_verdict(succ, ex, runtime))


TABLE_COLUMNS = ("instance", "max_runtime", "success_{a}", "success_{b}", "excess_{a}",
                 "excess_{b}", "excess_p", "runtime_{a}", "runtime_{b}", "runtime_p", "verdict")


def _fmt(x, spec=".4f") -> str:
    return NOT_APPLICABLE if x is None else format(x, spec)


def table_row(r: ComparisonReport, a: str = "A", b: str = "B") -> list[str]:
    verdict = {A_WINS: a, B_WINS: b}.get(r.verdict, INCOMPARABLE)
    e = r.excess
    return [
        r.instance, f"{r.max_runtime:g}",
        NOT_APPLICABLE if r.success is None else f"{r.success[0]}/{r.runs}",
        NOT_APPLICABLE if r.success is None else f"{r.success[1]}/{r.runs}",
        _fmt(e and e.mean_a), _fmt(e and e.mean_b), _fmt(e and e.p, ".3g"),
        _fmt(r.runtime.mean_a), _fmt(r.runtime.mean_b), _fmt(r.runtime.p, ".3g"), verdict,
    ]


def write_table(path, reports: Iterable[ComparisonReport], a: str = "A", b: str = "B",
                extra: dict[str, str] | None = None) -> None:
    """Write comparison rows as CSV; ``extra`` becomes leading comment lines."""
    with open(path, "w", newline="") as fh:
        for k, v in (extra or {}).items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh)
        w.writerow([c.format(a=a, b=b) for c in TABLE_COLUMNS])
        for r in reports:
            w.writerow(table_row(r, a, b))
