"""RKJL convergence for several sketch dimensions d, paired across d.

    python scripts/figure2.py --d 5,20,100 --out results/fig2
"""
import argparse
from pathlib import Path

import numpy as np

from rkjl.harness import ProblemSpec, export_traces_csv, render_convergence_svg, run_d_sweep
from rkjl.solvers import SolverConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=6000)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--d", default="5,20,100")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--iters", type=int, default=3000)
    ap.add_argument("--threshold", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/fig2"))
    args = ap.parse_args()

    d_values = [int(v) for v in args.d.split(",")]
    spec = ProblemSpec(m=args.m, n=args.n, seed=args.seed)
    res = run_d_sweep(spec, d_values, SolverConfig(max_iterations=args.iters), args.trials,
                      args.threshold, jobs=args.jobs)

    args.out.parent.mkdir(parents=True, exist_ok=True)
    export_traces_csv(res, args.out.with_suffix(".csv"))
    render_convergence_svg(res, args.out.with_suffix(".svg"))
    for lab, its in res.extras["iterations_to_threshold"].items():
        print(f"{lab:14s} median iterations to {args.threshold:g}: {np.median(its):g}")


if __name__ == "__main__":
    main()
