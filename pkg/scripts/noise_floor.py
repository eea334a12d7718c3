"""RK on b = A x + w: terminal error against the floor sqrt(R) * gamma.

    python scripts/noise_floor.py --gamma 0.01
"""
import argparse
import math

import numpy as np

from rkjl.harness import ProblemSpec, run_noise_experiment
from rkjl.solvers import SolverConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=500)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--gamma", type=float, default=0.01, help="noise scale")
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--iters", type=int, default=None, help="default 10 n")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = ProblemSpec(m=args.m, n=args.n, model="gaussian", normalize_rows=True, mode="noisy",
                       noise_scale=args.gamma, seed=args.seed)
    cfg = SolverConfig(max_iterations=args.iters or 10 * args.n)
    res = run_noise_experiment(spec, cfg, args.trials)
    ex = res.extras
    final = np.array([t.errors[-1] for t in res.traces["rk"]])
    bound = np.array([b[-1] for b in ex["bound"]])
    print(f"median R          {np.median(ex['R']):.2f}")
    print(f"median gamma      {np.median(ex['gamma']):.3e}")
    print(f"median floor      {np.median(ex['floor']):.3e}")
    print(f"median final err  {np.median(final):.3e}")
    print(f"trials within bound: {int(np.sum(final <= bound))}/{len(final)}")
    print(f"final/floor ratio: median {np.median(final / np.array(ex['floor'])):.3f}, "
          f"max {np.max(final / np.array(ex['floor'])):.3f}")
    assert all(math.isfinite(v) for v in final)


if __name__ == "__main__":
    main()
