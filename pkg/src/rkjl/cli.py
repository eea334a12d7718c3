"""Command-line entry point: ``rkjl <subcommand> [flags]``.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import harness
from .analysis import bound_report
from .errors import RKJLError
from .harness import (
    ExperimentResult,
    PlotOptions,
    ProblemSpec,
    export_traces_csv,
    read_matrix,
    read_traces_csv,
    read_vector,
    render_convergence_svg,
    write_matrix,
)
from .linalg import RngState, make_system, sphere_uniform
from .sketch import DEFAULT_C, jl_dimension
from .solvers import METHODS, STREAM_X0, SolverConfig, prepare_system, solve

log = logging.getLogger("rkjl")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {value}")
    return value


def _delta(text: str) -> float:
    value = _nonneg_float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {value}")
    return value


def _int_list(text: str) -> list:
    return [_positive_int(t) for t in text.split(",") if t.strip()]


def _method_list(text: str) -> list:
    methods = [t.strip() for t in text.split(",") if t.strip()]
    for m in methods:
        if m not in METHODS:
            raise argparse.ArgumentTypeError(f"unknown method {m!r}; choose from {METHODS}")
    if not methods:
        raise argparse.ArgumentTypeError("need at least one method")
    return methods


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_problem_flags(p, mode="homogeneous", trials=20):
    p.add_argument("--m", type=_positive_int, default=6000, help="number of rows (default 6000)")
    p.add_argument("--n", type=_positive_int, default=100, help="number of columns (default 100)")
    p.add_argument("--model", choices=harness.MODELS, default="bernoulli",
                   help="entry model (default bernoulli)")
    p.add_argument("--mode", choices=harness.MODES, default=mode,
                   help=f"consistency mode (default {mode})")
    p.add_argument("--normalize", action="store_true", help="scale every row to unit norm")
    p.add_argument("--noise-scale", type=_nonneg_float, default=0.0,
                   help="noise level for noisy mode: |w_i| <= scale * ||a_i||")
    p.add_argument("--trials", type=_positive_int, default=trials,
                   help=f"paired trials (default {trials})")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--jobs", type=_positive_int, default=1, help="parallel trial workers")


def _add_solver_flags(p, max_iters_help="iteration budget (default 10 n)"):
    p.add_argument("--max-iters", type=_positive_int, default=None, help=max_iters_help)
    p.add_argument("--tolerance", type=_nonneg_float, default=0.0,
                   help="stop once the error is at most this (default 0: run the budget)")
    p.add_argument("--s", type=_positive_int, default=None,
                   help="candidate rows per iteration (default n)")
    p.add_argument("--replacement", choices=("with", "without"), default="with",
                   help="candidate sampling (default with replacement)")
    p.add_argument("--delta", type=_delta, default=0.3, help="JL distortion for default d")
    p.add_argument("--C", type=_nonneg_float, default=DEFAULT_C, dest="C",
                   help="JL constant (default 8)")
    p.add_argument("--no-test-step", action="store_true",
                   help="skip the exact recheck against the first candidate")
    p.add_argument("--recompute-sketch", action="store_true",
                   help="recompute Phi x_k every iteration (O(nd)) instead of updating it")


def _add_output_flags(p):
    p.add_argument("--out", required=True, type=Path, help="trace CSV to write")
    p.add_argument("--svg", type=Path, default=None, help="also render a convergence SVG")
    p.add_argument("--timing", action="store_true",
                   help="write measured elapsed_ns (otherwise 0, for reproducible files)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rkjl", description="Randomized Kaczmarz solvers with JL-sketched row selection.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("gen", help="generate a test system",
                       description="Write A.rkmx, b.rkmx and x.rkmx into --out.")
    p.add_argument("--m", type=_positive_int, required=True, help="number of rows")
    p.add_argument("--n", type=_positive_int, required=True, help="number of columns")
    p.add_argument("--model", choices=harness.MODELS, default="bernoulli", help="entry model")
    p.add_argument("--mode", choices=harness.MODES, default="homogeneous",
                   help="consistency mode")
    p.add_argument("--normalize", action="store_true", help="scale every row to unit norm")
    p.add_argument("--noise-scale", type=_nonneg_float, default=0.0, help="noisy-mode level")
    p.add_argument("--seed", type=int, default=0, help="seed (default 0)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")

    p = sub.add_parser("solve", help="run one solver on stored files",
                       description="Solve A x = b from binary matrix files.")
    p.add_argument("--A", required=True, type=Path, dest="A", help="matrix file")
    p.add_argument("--b", required=True, type=Path, help="right-hand side file")
    p.add_argument("--x-true", type=Path, default=None, help="true solution (enables errors)")
    p.add_argument("--method", choices=METHODS, default="rk", help="solver (default rk)")
    p.add_argument("--d", type=_positive_int, default=None,
                   help="sketch dimension for rkjl (default: JL dimension for 10 n^2 "
                        "points, capped at n)")
    p.add_argument("--seed", type=int, default=0, help="seed (default 0)")
    p.add_argument("--x0", choices=("zeros", "sphere"), default="zeros",
                   help="initial estimate (default zeros)")
    p.add_argument("--trace-out", type=Path, default=None, help="trace CSV to write")
    p.add_argument("--timing", action="store_true", help="write measured elapsed_ns")
    _add_solver_flags(p)

    p = sub.add_parser("bound", help="evaluate R, sigma_min and the JL dimension",
                       description="Print closed-form bound quantities.")
    p.add_argument("--A", type=Path, default=None, dest="A", help="matrix file")
    p.add_argument("--delta", type=_delta, default=0.3, help="JL distortion (default 0.3)")
    p.add_argument("--set-size", type=int, default=None,
                   help="JL point-set size (default 10 n^2 when --A is given)")
    p.add_argument("--C", type=_nonneg_float, default=DEFAULT_C, dest="C",
                   help="JL constant (default 8)")
    p.add_argument("--k-max", type=int, default=0, help="length of the RK bound curve")
    p.add_argument("--initial-error-sq", type=_nonneg_float, default=1.0,
                   help="||x0 - x||^2 for the bound curve (default 1)")
    p.add_argument("--curve-out", type=Path, default=None, help="bound curve CSV to write")

    p = sub.add_parser("compare", help="paired comparison of methods",
                       description="Run several methods on identical problems and x0.")
    p.add_argument("--methods", type=_method_list, default=["rk", "oracle"],
                   help="comma-separated methods (default rk,oracle)")
    p.add_argument("--d", type=_positive_int, default=None, help="sketch dimension for rkjl")
    _add_problem_flags(p)
    _add_solver_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("sweep", help="RKJL over several sketch dimensions",
                       description="RKJL once per --d value, paired across d.")
    p.add_argument("--d", type=_int_list, required=True, help="comma-separated d values")
    p.add_argument("--threshold", type=_nonneg_float, default=1e-3,
                   help="error level for iterations-to-threshold (default 1e-3)")
    p.add_argument("--identity-full", action="store_true",
                   help="use the exact identity sketch for d == n")
    _add_problem_flags(p)
    _add_solver_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("noise", help="RK on a noisy system with its error floor",
                       description="RK traces plus the noisy-RK bound and floor sqrt(R) gamma.")
    p.add_argument("--gamma-scale", type=_nonneg_float, default=0.01,
                   help="noise level: |w_i| <= scale * ||a_i|| (default 0.01)")
    p.add_argument("--bounds-out", type=Path, default=None,
                   help="bound/floor CSV (default: <out>.bounds.csv)")
    _add_problem_flags(p, mode="noisy", trials=50)
    _add_solver_flags(p)
    _add_output_flags(p)
    p.set_defaults(m=500, n=20, model="gaussian", normalize=True)

    p = sub.add_parser("plot", help="render a trace CSV as SVG",
                       description="Median error per method from a trace CSV.")
    p.add_argument("--csv", required=True, type=Path, help="trace CSV")
    p.add_argument("--svg", required=True, type=Path, help="SVG to write")
    p.add_argument("--title", default="l2 error vs iteration", help="chart title")
    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _solver_config(args, method, n, max_iters_default):
    return SolverConfig(
        method=method,
        max_iterations=args.max_iters or max_iters_default,
        error_tolerance=args.tolerance,
        candidate_set_size=args.s,
        sketch_dim=getattr(args, "d", None) if isinstance(getattr(args, "d", None), int) else None,
        jl_delta=args.delta,
        jl_constant=args.C,
        seed=args.seed,
        replacement=args.replacement,
        test_step=not args.no_test_step,
        recompute_sketch=args.recompute_sketch,
    )


def _problem_spec(args, mode=None, noise_scale=None):
    return ProblemSpec(m=args.m, n=args.n, model=args.model, normalize_rows=args.normalize,
                       mode=mode or args.mode,
                       noise_scale=args.noise_scale if noise_scale is None else noise_scale,
                       seed=args.seed)


def cmd_gen(args) -> int:
    spec = ProblemSpec(m=args.m, n=args.n, model=args.model, normalize_rows=args.normalize,
                       mode=args.mode, noise_scale=args.noise_scale, seed=args.seed)
    A, b, x = harness.generate_problem(spec, RngState(args.seed))
    args.out.mkdir(parents=True, exist_ok=True)
    for name, data in (("A", A), ("b", b), ("x", x)):
        write_matrix(args.out / f"{name}.rkmx", data)
    print(f"wrote {args.out / 'A.rkmx'} ({args.m}x{args.n}), b.rkmx, x.rkmx")
    return 0


def cmd_solve(args) -> int:
    A = read_matrix(args.A)
    b = read_vector(args.b)
    true_x = read_vector(args.x_true) if args.x_true else None
    m, n = A.shape
    config = _solver_config(args, args.method, n, 10 * n)
    t0 = time.perf_counter()
    system = prepare_system(make_system(A, b), None, config)
    prep = time.perf_counter() - t0
    x0 = sphere_uniform(RngState(args.seed, STREAM_X0), n) if args.x0 == "sphere" else None
    trace = solve(system, config, x0=x0, true_x=true_x)
    if args.trace_out:
        result = ExperimentResult(None, [args.method], {args.method: [trace]})
        export_traces_csv(result, args.trace_out, include_timing=args.timing)
    if args.method == "rkjl":
        print(f"sketch_dim={system.sketch.d} preprocess_seconds={prep:.6f}")
    print(f"method={args.method} iterations={len(trace) - 1} status={trace.status} "
          f"final_error={trace.final_error:.6e}")
    return 0


def cmd_bound(args, parser) -> int:
    if args.A is None:
        if args.set_size is None:
            parser.error("bound: give --A or --set-size")
        print(f"jl_dimension={jl_dimension(args.delta, args.set_size, args.C)}")
        return 0
    A = read_matrix(args.A)
    n = A.shape[1]
    set_size = args.set_size or max(2, 10 * n * n)
    report = bound_report(A, args.initial_error_sq, args.k_max, args.delta, set_size, args.C)
    print(f"R={report.R:.17g}")
    print(f"sigma_min={report.sigma_min:.17g}")
    print(f"frobenius_sq={report.frobenius_sq:.17g}")
    print(f"jl_dimension={report.jl_dimension}")
    if args.curve_out:
        with open(args.curve_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("iteration", "bound"))
            for k, v in report.curve or [(0, args.initial_error_sq)]:
                w.writerow((k, format(v, ".17g")))
    return 0


def _finish_experiment(args, result: ExperimentResult) -> int:
    export_traces_csv(result, args.out, include_timing=args.timing)
    if args.svg:
        render_convergence_svg(result, args.svg)
    total = result.trials * len(result.labels)
    for (label, trial), msg in sorted(result.failures.items()):
        print(f"trial {trial} {label} failed: {msg}", file=sys.stderr)
    for label in result.labels:
        med = result.median_curve(label)
        if len(med):
            print(f"{label}: median final error {med[-1]:.6e} after {len(med) - 1} iterations")
    if total and len(result.failures) == total:
        print("error: every trial failed", file=sys.stderr)
        return 1
    return 0


def cmd_compare(args) -> int:
    spec = _problem_spec(args)
    config = _solver_config(args, args.methods[0], args.n, 10 * args.n)
    result = harness.run_comparison(spec, args.methods, args.trials, config, jobs=args.jobs)
    return _finish_experiment(args, result)


def cmd_sweep(args) -> int:
    spec = _problem_spec(args)
    config = _solver_config(args, "rkjl", args.n, 10 * args.n)
    result = harness.run_d_sweep(spec, args.d, config, args.trials, args.threshold,
                                 identity_hook=args.identity_full, jobs=args.jobs)
    for label, its in result.extras["iterations_to_threshold"].items():
        print(f"{label}: median iterations to {args.threshold:g}: {np.median(its):g}")
    return _finish_experiment(args, result)


def cmd_noise(args) -> int:
    spec = _problem_spec(args, mode="noisy", noise_scale=args.gamma_scale)
    config = _solver_config(args, "rk", args.n, 10 * args.n)
    result = harness.run_noise_experiment(spec, config, args.trials, jobs=args.jobs)
    bounds_out = args.bounds_out or args.out.with_suffix(".bounds.csv")
    with open(bounds_out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("trial", "iteration", "bound", "floor", "R", "gamma"))
        ex = result.extras
        for t in range(result.trials):
            for k, v in enumerate(ex["bound"][t]):
                w.writerow((t, k, format(v, ".17g"), format(ex["floor"][t], ".17g"),
                            format(ex["R"][t], ".17g"), format(ex["gamma"][t], ".17g")))
    print(f"median floor sqrt(R)*gamma = {np.median(result.extras['floor']):.6e}")
    return _finish_experiment(args, result)


def cmd_plot(args) -> int:
    curves = read_traces_csv(args.csv)
    series = {lab: harness.summarize_curves(list(trials.values()))[0]
              for lab, trials in curves.items()}
    render_convergence_svg(series, args.svg, PlotOptions(title=args.title))
    print(f"wrote {args.svg}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "m", None) is not None and getattr(args, "n", None) is not None \
            and args.m < args.n:
        parser.error(f"--m ({args.m}) must be at least --n ({args.n})")
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "bound":
            return cmd_bound(args, parser)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "noise":
            return cmd_noise(args)
        return cmd_plot(args)
    except (RKJLError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
