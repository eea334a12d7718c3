"""Standard RK against greedy selection (exact and sketched) on a Bernoulli system.

    python scripts/figure1.py --out results/fig1
"""
import argparse
from pathlib import Path

import numpy as np

from rkjl.harness import ProblemSpec, export_traces_csv, render_convergence_svg, run_comparison
from rkjl.solvers import SolverConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=6000)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--iters", type=int, default=None, help="default 10 n")
    ap.add_argument("--d", type=int, default=None, help="RKJL sketch dimension")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/fig1"))
    args = ap.parse_args()

    spec = ProblemSpec(m=args.m, n=args.n, seed=args.seed)
    cfg = SolverConfig(max_iterations=args.iters or 10 * args.n, sketch_dim=args.d)
    res = run_comparison(spec, ["rk", "rkjl", "oracle"], args.trials, cfg, jobs=args.jobs)

    args.out.parent.mkdir(parents=True, exist_ok=True)
    export_traces_csv(res, args.out.with_suffix(".csv"))
    render_convergence_svg(res, args.out.with_suffix(".svg"))
    for k in sorted({0, args.n, 2 * args.n, cfg.max_iterations}):
        row = "  ".join(f"{lab}={res.median_curve(lab)[k]:.3e}" for lab in res.labels)
        print(f"k={k:5d}  {row}")
    rk, oracle = res.median_curve("rk"), res.median_curve("oracle")
    print("oracle median <= rk median everywhere:", bool(np.all(oracle <= rk)))


if __name__ == "__main__":
    main()
