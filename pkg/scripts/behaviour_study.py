"""Average behaviour curves of GLS and EB-GLS on an instance with known optima.

Writes one CSV per algorithm with the mean excess, mean distance to the
nearest optimum and the two undesirable-penalty ratios at every checkpoint.

    python scripts/behaviour_study.py att532 --runs 20 --iterations 200000
"""
import argparse
import csv
from pathlib import Path

from glstsp.harness import RunSettings, behaviour_study
from glstsp.landscape import OptimaPool
from glstsp.tsp_core import resolve_instance


def _fmt(x):
    return "" if x is None else f"{float(x):.6g}"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("instance")
    ap.add_argument("--pool", help="optima file (default: the bundled one)")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=200_000)
    ap.add_argument("--stride", type=int, default=1000)
    ap.add_argument("--warmup", default="10000", help="EB-GLS warm-up")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/behaviour")
    args = ap.parse_args()

    inst = resolve_instance(args.instance)
    pool = OptimaPool.load(args.pool) if args.pool else OptimaPool.load_bundled(inst.name)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for algo in ("gls", "ebgls"):
        series = behaviour_study(inst, algo, pool, args.runs, args.iterations, args.stride,
                                 args.seed, RunSettings(warmup=args.warmup))
        cols = zip(series.mean_excess(), series.mean_distance(), series.mean_ratio(),
                   series.mean_incremental_ratio())
        path = out / f"{inst.name}_{algo}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "excess", "distance", "ratio", "incremental_ratio"])
            for k, row in enumerate(cols):
                w.writerow([(k + 1) * args.stride, *map(_fmt, row)])
        done = sum(f is not None for f in series.finished_at)
        print(f"{algo}: {done}/{args.runs} runs reached an optimum; wrote {path}")


if __name__ == "__main__":
    main()
