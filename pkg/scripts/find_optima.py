"""Collect distinct optimal tours of an instance by repeated EB-GLS runs.

    python scripts/find_optima.py att532 --runs 40 --out src/glstsp/data/att532.optima
"""
import argparse

from glstsp.harness import RunSettings, derive_seed, solve
from glstsp.landscape import OptimaPool, optima_pool_stats
from glstsp.tsp_core import optimum_registry, resolve_instance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("instance")
    ap.add_argument("--runs", type=int, default=40)
    ap.add_argument("--time-limit", type=float, default=60.0)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    inst = resolve_instance(args.instance)
    optimum = optimum_registry()[inst.name]
    pool = OptimaPool(optimum)
    settings = RunSettings(time_limit=args.time_limit, warmup="0")
    for k in range(args.runs):
        seed = derive_seed(args.seed, inst.name, k)
        best, state = solve(inst, "ebgls", seed, settings, target=optimum)
        new = best.cost_g == optimum and pool.add(best)
        print(f"run {k}: cost {best.cost_g} after {state.elapsed:.1f}s"
              f"{' (new optimum)' if new else ''}; pool size {len(pool)}", flush=True)
    pool.save(args.out)
    print(optima_pool_stats(pool))


if __name__ == "__main__":
    main()
