"""Command line entry point: ``glstsp solve|bench|landscape|gen``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import (ALGORITHMS, Campaign, RunSettings, derive_seed, protocol_time_limit,
                      run_campaign, solve)
from .landscape import (DEFAULT_RHO, DEFAULT_THETA, DegenerateDataError, OptimaPool,
                        TrajectoryRecorder, big_valley_check, optima_pool_stats, scatter_rows,
                        write_corpus, write_scatter)
from .stats import excess
from .tsp_core import (format_tsplib, generate_random_instance, optimum_registry,
                       resolve_instance)

EXIT_OPTIMUM = 0
EXIT_BUDGET = 10


def _solve(args) -> int:
    inst = resolve_instance(args.instance)
    registry = optimum_registry()
    optimum = registry.get(inst.name)
    target = args.target_cost if args.target_cost is not None else optimum
    limit = args.time_limit
    if limit is None and args.max_iters is None:
        limit = float(protocol_time_limit(inst.n))
    settings = RunSettings(limit, args.max_iters, args.lambda_coeff, args.w, args.warmup,
                           args.elite_period, args.start)
    hooks = {}
    recorder = None
    if args.trace:
        recorder = TrajectoryRecorder(args.seed)
        hooks["on_improve"] = recorder
    best, state = solve(inst, args.algo, args.seed, settings, target=target, **hooks)
    best.check(inst)
    found = target is not None and best.cost_g <= target
    print(f"instance {inst.name}")
    print(f"algorithm {args.algo}")
    print(f"seed {args.seed}")
    print(f"start_cost {state.start_cost}")
    print(f"cost {best.cost_g}")
    if optimum is not None:
        print(f"optimum {optimum}")
        print(f"excess {excess(best.cost_g, optimum):.6f}")
    if args.max_iters is not None or found:
        # iteration counts are reproducible only when the run is not cut by the clock
        print(f"iterations {state.iteration}")
    print(f"status {'optimum' if found else 'budget'}")
    print(f"iterations {state.iteration} seconds {state.elapsed:.3f}", file=sys.stderr)
    if recorder is not None:
        write_corpus(args.trace, recorder.samples)
    if args.tour_out:
        from .tsp_core import format_tour
        Path(args.tour_out).write_text(format_tour(inst.name, best.order,
                                                   f"cost {best.cost_g}"))
    return EXIT_OPTIMUM if found else EXIT_BUDGET


def _bench(args) -> int:
    campaign = Campaign.from_yaml(args.campaign)
    result = run_campaign(campaign, workers=args.workers, out=args.out)
    for r in result.reports:
        print(f"{r.instance}: success {r.success} verdict {r.verdict}")
    print(f"wrote {result.out}", file=sys.stderr)
    return 0


def _landscape(args) -> int:
    registry = optimum_registry()
    multi = len(args.instances) > 1
    reports = {}
    for spec in args.instances:
        inst = resolve_instance(spec)
        optimum = registry.get(inst.name)
        if optimum is None:
            print(f"{inst.name}: no registered optimum, skipped", file=sys.stderr)
            continue
        limit = args.time_limit or float(protocol_time_limit(inst.n))
        settings = RunSettings(limit, None, warmup=args.warmup)
        pool = OptimaPool(optimum)
        if args.known_pool:
            for t in OptimaPool.load(_path(args.known_pool, inst.name, True)):
                pool.add(t, optimum)
        samples = []
        hits = 0
        for k in range(args.runs):
            seed = derive_seed(args.seed, inst.name, k)
            for algo in args.algos:
                rec = TrajectoryRecorder(f"{algo}-{k}")
                best, _ = solve(inst, algo, seed, settings, target=optimum, on_improve=rec)
                samples.extend(rec.samples)
                if best.cost_g == optimum:
                    hits += 1
                    pool.add(best)
        name = inst.name
        if args.pool:
            pool.save(_path(args.pool, name, multi))
        if args.corpus:
            write_corpus(_path(args.corpus, name, multi), samples)
        report = {"instance": name, "runs": args.runs * len(args.algos), "optimum_hits": hits,
                  "samples": len(samples), "optima": len(pool)}
        if len(pool):
            if args.scatter:
                write_scatter(_path(args.scatter, name, multi), scatter_rows(samples, pool))
            ps = optima_pool_stats(pool)
            report.update(pool_min=ps.min, pool_mean=ps.mean, pool_max=ps.max)
            try:
                bv = big_valley_check(pool, samples, inst.n, args.rho, args.theta)
                report.update(fdc=bv.fdc, req1=bv.req1, req2=bv.req2, big_valley=bv.big_valley)
            except DegenerateDataError as exc:
                report.update(fdc=None, req1=None, req2=None, note=str(exc))
        else:
            report.update(fdc=None, req1=None, req2=None, note="no optimum reached")
        reports[name] = report
    print(json.dumps(reports, indent=2, sort_keys=True))
    return 0


def _path(template: str, name: str, multi: bool) -> str:
    if "{instance}" in template:
        return template.format(instance=name)
    if multi:
        p = Path(template)
        return str(p.with_name(f"{p.stem}_{name}{p.suffix}"))
    return template


def _gen(args) -> int:
    inst = generate_random_instance(args.n, args.seed, args.name)
    text = format_tsplib(inst)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="glstsp", description="Guided Local Search for the TSP")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run one search on one instance")
    s.add_argument("--instance", required=True, help="TSPLIB file or bundled instance name")
    s.add_argument("--algo", choices=ALGORITHMS, default="ebgls")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--time-limit", type=float, help="seconds (default ceil(N/10))")
    s.add_argument("--max-iters", type=int)
    s.add_argument("--target-cost", type=int, help="stop once reached (default: known optimum)")
    s.add_argument("--w", type=float, default=2.0)
    s.add_argument("--lambda-coeff", type=float, default=0.3)
    s.add_argument("--warmup", default="auto",
                   help="e.g. 10000 (iterations), 5s, 10%%, auto")
    s.add_argument("--elite-period", type=int, default=100)
    s.add_argument("--start", choices=("random", "nn"), default="random")
    s.add_argument("--trace", help="write best-so-far trajectory lines here")
    s.add_argument("--tour-out", help="write the best tour in TSPLIB tour format")
    s.set_defaults(func=_solve)

    b = sub.add_parser("bench", help="run a YAML campaign")
    b.add_argument("--campaign", required=True)
    b.add_argument("--workers", type=int)
    b.add_argument("--out")
    b.set_defaults(func=_bench)

    la = sub.add_parser("landscape", help="sample trajectories and optima")
    la.add_argument("--instances", nargs="+", required=True)
    la.add_argument("--runs", type=int, default=40, help="runs per algorithm")
    la.add_argument("--algos", nargs="+", choices=ALGORITHMS, default=list(ALGORITHMS))
    la.add_argument("--time-limit", type=float)
    la.add_argument("--warmup", default="0")
    la.add_argument("--seed", type=int, default=0)
    la.add_argument("--known-pool", help="optima file(s) to seed the pool")
    la.add_argument("--pool", help="write the optima pool here")
    la.add_argument("--scatter", help="write distance,excess_percent CSV here")
    la.add_argument("--corpus", help="write trajectory lines here")
    la.add_argument("--rho", type=float, default=DEFAULT_RHO)
    la.add_argument("--theta", type=float, default=DEFAULT_THETA)
    la.set_defaults(func=_landscape)

    g = sub.add_parser("gen", help="write a random uniform instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--name")
    g.add_argument("--out", required=True, help="output path or - for stdout")
    g.set_defaults(func=_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"glstsp: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
