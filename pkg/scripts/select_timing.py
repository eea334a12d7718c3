"""Select-phase cost per RKJL iteration as d doubles (expected roughly linear in d).

    python scripts/select_timing.py --n 1000 --d 25,50,100,200
"""
import argparse

from rkjl.harness import time_select_phase


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--d", default="25,50,100")
    ap.add_argument("--iterations", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()

    d_values = [int(v) for v in args.d.split(",")]
    times = time_select_phase(args.n, d_values, iterations=args.iterations,
                              repeats=args.repeats)
    prev = None
    for d in d_values:
        ratio = "" if prev is None else f"  x{times[d] / times[prev]:.2f}"
        print(f"d={d:4d}  {times[d] / 1e3:8.1f} us/iteration{ratio}")
        prev = d


if __name__ == "__main__":
    main()
