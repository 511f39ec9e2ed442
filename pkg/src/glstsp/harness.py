"""Seeded experiment campaigns: run cells, persist records, build tables."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable

import yaml

from . import __version__
from .ebgls import EbglsConfig, Warmup, run_ebgls
from .gls import GlsConfig, SearchState, Stop, run_gls, start_tour
from .landscape import OptimaPool, nearest_optimum_distance
from .stats import Checkpoint, MetricSeries, build_report, write_table
from .tsp_core import Instance, generate_random_instance, optimum_registry, resolve_instance

log = logging.getLogger(__name__)

ALGORITHMS = ("gls", "ebgls")
WORKERS_ENV = "GLSTSP_WORKERS"


def derive_seed(master_seed: int, instance: str, pair: int) -> int:
    """Per-pair seed; the algorithm is left out so paired runs share a start tour."""
    digest = hashlib.sha256(f"{master_seed}/{instance}/{pair}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def protocol_time_limit(n: int) -> int:
    """Default budget of ceil(n / 10) seconds."""
    return math.ceil(n / 10)


# --- instance specs -------------------------------------------------------------

def instance_label(spec) -> str:
    if isinstance(spec, dict):
        g = spec["generate"]
        return g.get("name") or f"rand{g['n']}_{g['seed']}"
    return Path(str(spec)).name.removesuffix(".tsp")


def _spec_key(spec) -> str:
    return json.dumps(spec, sort_keys=True)


@lru_cache(maxsize=16)
def _load(key: str) -> Instance:
    spec = json.loads(key)
    if isinstance(spec, dict):
        g = spec["generate"]
        return generate_random_instance(int(g["n"]), int(g["seed"]), g.get("name"))
    return resolve_instance(str(spec))


def load_spec(spec) -> Instance:
    return _load(_spec_key(spec))


# --- single runs ------------------------------------------------------------------

@dataclass(frozen=True)
class RunSettings:
    time_limit: float | None = None
    max_iterations: int | None = None
    lambda_coefficient: float = 0.3
    w: float = 2.0
    warmup: str = "auto"
    elite_update_period: int = 100
    start: str = "random"


@dataclass(frozen=True)
class RunRecord:
    instance: str
    algorithm: str
    pair: int
    seed: int
    start_cost: int
    best_cost: int
    success: bool
    iterations: int
    seconds: float


def solve(inst: Instance, algorithm: str, seed: int, settings: RunSettings,
          target: int | None = None, **hooks) -> tuple[Any, SearchState]:
    """Run one algorithm on one instance; returns (best tour, state)."""
    stop = Stop(settings.max_iterations, settings.time_limit, target)
    base = GlsConfig(settings.lambda_coefficient, stop, seed, settings.start)
    if algorithm == "gls":
        return run_gls(inst, base, **hooks)
    if algorithm == "ebgls":
        warm = Warmup.parse(settings.warmup, inst.n, settings.time_limit)
        cfg = EbglsConfig(base, settings.w, warm, settings.elite_update_period)
        return run_ebgls(inst, cfg, **hooks)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def _run_cell(args) -> RunRecord:
    spec, algorithm, pair, seed, settings, optimum = args
    inst = load_spec(spec)
    best, state = solve(inst, algorithm, seed, settings, target=optimum)
    return RunRecord(instance_label(spec), algorithm, pair, seed, state.start_cost,
                     best.cost_g, optimum is not None and best.cost_g <= optimum,
                     state.iteration, state.elapsed)


# --- campaigns ----------------------------------------------------------------------

@dataclass
class Campaign:
    """A grid of instances x algorithms x paired runs."""

    instances: list
    runs: int = 10
    algorithms: tuple[str, ...] = ALGORITHMS
    master_seed: int = 0
    time_limit: float | str | None = "auto"
    max_iterations: int | None = None
    clock: str = "wall"  # "iterations": runtimes are iteration counts
    lambda_coefficient: float = 0.3
    w: float = 2.0
    warmup: str = "auto"
    elite_update_period: int = 100
    start: str = "random"
    workers: int = 1
    out: str = "results"
    name: str = "campaign"

    def __post_init__(self):
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}")
        if len(self.algorithms) < 1 or self.runs < 1:
            raise ValueError("need at least one algorithm and one run")
        if self.clock not in ("wall", "iterations"):
            raise ValueError("clock must be 'wall' or 'iterations'")
        if self.clock == "iterations" and self.max_iterations is None:
            raise ValueError("an iteration clock needs max_iterations")
        if self.clock == "iterations":
            self.time_limit = None
        self.algorithms = tuple(self.algorithms)
        self.warmup = str(self.warmup)

    @classmethod
    def from_yaml(cls, path: str | Path) -> "Campaign":
        data = yaml.safe_load(Path(path).read_text()) or {}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown campaign keys: {sorted(unknown)}")
        if "instances" not in data:
            raise ValueError("campaign needs an 'instances' list")
        return cls(**data)

    def config_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")  # results do not depend on parallelism
        d.pop("out")
        d["algorithms"] = list(self.algorithms)
        d["version"] = __version__
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.config_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def time_limit_for(self, inst: Instance) -> float | None:
        if self.time_limit == "auto":
            return float(protocol_time_limit(inst.n))
        return None if self.time_limit is None else float(self.time_limit)

    def settings_for(self, inst: Instance) -> RunSettings:
        return RunSettings(self.time_limit_for(inst), self.max_iterations,
                           self.lambda_coefficient, self.w, self.warmup,
                           self.elite_update_period, self.start)

    def cells(self, registry: dict[str, int]) -> list[tuple]:
        out = []
        for spec in self.instances:
            inst = load_spec(spec)
            label = instance_label(spec)
            settings = self.settings_for(inst)
            optimum = registry.get(inst.name, registry.get(label))
            for pair in range(self.runs):
                seed = derive_seed(self.master_seed, label, pair)
                for algo in self.algorithms:
                    out.append((spec, algo, pair, seed, settings, optimum))
        return out


def worker_count(requested: int | None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, requested or 1)


def execute(cells: list[tuple], workers: int) -> list[RunRecord]:
    if workers <= 1 or len(cells) <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, cells, chunksize=1))


RUN_COLUMNS = ("instance", "algorithm", "pair", "seed", "start_cost", "best_cost", "success",
               "iterations", "runtime")


def runtime_of(rec: RunRecord, campaign: Campaign, limit: float | None) -> float:
    """Runtime entry for tables: unsuccessful runs are charged the full budget."""
    if campaign.clock == "iterations":
        return float(rec.iterations if rec.success else campaign.max_iterations)
    return rec.seconds if rec.success else float(limit)


def _header(fh, campaign: Campaign) -> None:
    fh.write(f"# campaign: {campaign.name}\n# config_fingerprint: {campaign.fingerprint()}\n")


def write_runs(path: Path, records: list[RunRecord], campaign: Campaign,
               limits: dict[str, float | None]) -> None:
    with open(path, "w", newline="") as fh:
        _header(fh, campaign)
        w = csv.writer(fh)
        w.writerow(RUN_COLUMNS)
        for r in records:
            rt = runtime_of(r, campaign, limits[r.instance])
            w.writerow([r.instance, r.algorithm, r.pair, r.seed, r.start_cost, r.best_cost,
                        int(r.success), r.iterations,
                        f"{rt:.0f}" if campaign.clock == "iterations" else f"{rt:.4f}"])


def write_timings(path: Path, records: list[RunRecord], campaign: Campaign) -> None:
    with open(path, "w", newline="") as fh:
        _header(fh, campaign)
        w = csv.writer(fh)
        w.writerow(["instance", "algorithm", "pair", "seconds"])
        for r in records:
            w.writerow([r.instance, r.algorithm, r.pair, f"{r.seconds:.4f}"])


def read_runs(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


@dataclass
class CampaignResult:
    records: list[RunRecord]
    reports: list
    out: Path
    warnings: list[str] = field(default_factory=list)


def run_campaign(campaign: Campaign, workers: int | None = None,
                 out: str | Path | None = None) -> CampaignResult:
    """Run every cell, then write runs.csv, timings.csv and table.csv."""
    registry = optimum_registry()
    out = Path(out or campaign.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = campaign.cells(registry)
    records = execute(cells, worker_count(workers if workers is not None else campaign.workers))
    order = {(instance_label(c[0]), c[1], c[2]): i for i, c in enumerate(cells)}
    records.sort(key=lambda r: order[(r.instance, r.algorithm, r.pair)])
    limits, optima, warnings = {}, {}, []
    for spec in campaign.instances:
        inst = load_spec(spec)
        label = instance_label(spec)
        limits[label] = campaign.time_limit_for(inst)
        optima[label] = registry.get(inst.name, registry.get(label))
        if optima[label] is None:
            msg = f"no registered optimum for {label}: success and excess columns disabled"
            log.warning(msg)
            warnings.append(msg)
    write_runs(out / "runs.csv", records, campaign, limits)
    write_timings(out / "timings.csv", records, campaign)
    reports = table_from_records(records, campaign, limits, optima)
    if len(campaign.algorithms) == 2:
        a, b = campaign.algorithms
        write_table(out / "table.csv", reports, a, b,
                    {"campaign": campaign.name,
                     "config_fingerprint": campaign.fingerprint(),
                     "runtime_unit": "iterations" if campaign.clock == "iterations" else "seconds"})
    (out / "config.yaml").write_text(yaml.safe_dump(campaign.config_dict(), sort_keys=True))
    return CampaignResult(records, reports, out, warnings)


def table_from_records(records: list[RunRecord], campaign: Campaign,
                       limits: dict[str, float | None], optima: dict[str, int | None]) -> list:
    if len(campaign.algorithms) != 2:
        return []
    a, b = campaign.algorithms
    reports = []
    for label in limits:
        ra = sorted((r for r in records if r.instance == label and r.algorithm == a),
                    key=lambda r: r.pair)
        rb = sorted((r for r in records if r.instance == label and r.algorithm == b),
                    key=lambda r: r.pair)
        budget = campaign.max_iterations if campaign.clock == "iterations" else limits[label]
        reports.append(build_report(
            label, float(budget),
            ([r.best_cost for r in ra], [r.best_cost for r in rb]),
            ([runtime_of(r, campaign, limits[label]) for r in ra],
             [runtime_of(r, campaign, limits[label]) for r in rb]),
            optima[label]))
    return reports


# --- behaviour study ---------------------------------------------------------------

class CheckpointLog:
    """Records a Checkpoint every ``stride`` iterations of one run."""

    def __init__(self, pool: OptimaPool, stride: int,
                 snapshot: Callable[[SearchState], None] | None = None):
        self.pool = pool
        self.stride = stride
        self.points: list[Checkpoint] = []
        self.snapshot = snapshot

    def __call__(self, state: SearchState) -> None:
        best = state.best_tour()
        self.points.append(Checkpoint(state.iteration, best.cost_g,
                                      nearest_optimum_distance(best, self.pool),
                                      state.good_penalty, state.penalties.total_penalty))
        if self.snapshot is not None:
            self.snapshot(state)


def behaviour_run(inst: Instance, algorithm: str, seed: int, pool: OptimaPool,
                  iterations: int, stride: int = 1000, settings: RunSettings | None = None,
                  snapshot=None) -> tuple[CheckpointLog, SearchState]:
    """One iteration-budgeted run with checkpoint logging; stops at the optimum."""
    settings = settings or RunSettings(warmup="0")
    settings = RunSettings(None, iterations, settings.lambda_coefficient, settings.w,
                           settings.warmup, settings.elite_update_period, settings.start)
    logbook = CheckpointLog(pool, stride, snapshot)
    _, state = solve(inst, algorithm, seed, settings, target=pool.cost,
                     on_checkpoint=logbook, checkpoint_stride=stride,
                     good_edges=pool.edge_union())
    return logbook, state


def behaviour_study(inst: Instance, algorithm: str, pool: OptimaPool, runs: int,
                    iterations: int, stride: int = 1000, master_seed: int = 0,
                    settings: RunSettings | None = None) -> MetricSeries:
    series = MetricSeries(pool.cost, stride)
    for k in range(runs):
        seed = derive_seed(master_seed, inst.name, k)
        logbook, state = behaviour_run(inst, algorithm, seed, pool, iterations, stride, settings)
        finished = state.iteration if state.stop_reason == "target" else None
        series.add_run(logbook.points, finished)
    return series


def starting_cost(inst: Instance, seed: int, start: str = "random") -> int:
    return start_tour(inst, GlsConfig(seed=seed, start=start)).cost_g
