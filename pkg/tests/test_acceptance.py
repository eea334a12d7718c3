"""Acceptance gate: one test per criterion, run at the stated scale and tolerance.

A summary line per criterion is printed at the end of the pytest run.
"""
import math

import numpy as np

from rkjl.analysis import (
    compute_R,
    p_vector,
    rk_expected_error_sq,
    squared_step_lengths,
    theorem1_bound,
)
from rkjl.cli import main
from rkjl.harness import (
    ProblemSpec,
    run_comparison,
    run_d_sweep,
    run_noise_experiment,
    time_select_phase,
    trial_problem,
)
from rkjl.linalg import RngState, make_system, sphere_uniform
from rkjl.sketch import (
    build_sketch,
    identity_sketch,
    jl_dimension,
    pairwise_inner_product_errors,
    pairwise_sq_distance_ratios,
    precompute_rows,
)
from rkjl.solvers import (
    METHODS,
    IterateState,
    SolverConfig,
    prepare_system,
    project_onto_row,
    pythagorean_residual,
    solve,
    step_rkjl,
)

from test_analysis import enumerate_p


def test_criterion_01_pythagorean_identity():
    rng = RngState(2024, 7)
    worst = 0.0
    for case in range(100):
        n = 2 + int(rng.uniform(1)[0] * 49)
        m = n + int(rng.uniform(1)[0] * (501 - n))
        spec = ProblemSpec(m=m, n=n, model="gaussian", mode="planted", seed=case)
        (A, b, x), x0 = trial_problem(spec, 0)
        system = make_system(A, b)
        e0 = float(np.sum((x0 - x) ** 2))
        for method in METHODS:
            cfg = SolverConfig(method=method, max_iterations=100, seed=case, sketch_dim=5)
            trace = solve(prepare_system(system, None, cfg), cfg, x0=x0, true_x=x)
            xk = x0
            for j in trace.rows[1:]:
                if system.row_norms_sq[j] == 0:
                    continue
                xk1 = project_onto_row(xk, A[j], b[j], system.row_norms_sq[j])
                worst = max(worst, abs(pythagorean_residual(xk, xk1, x)) / e0)
                xk = xk1
            assert np.allclose(xk, trace.x, rtol=0, atol=1e-12)
    assert worst <= 1e-9, worst


def test_criterion_02_rk_expected_bound():
    spec = ProblemSpec(m=500, n=50, model="gaussian", normalize_rows=True, mode="planted",
                       seed=11)
    (A, b, x), x0 = trial_problem(spec, 0)
    system = make_system(A, b)
    R = compute_R(A).R
    k = np.arange(3 * 50 + 1)
    sq = np.array([solve(system, SolverConfig(max_iterations=150, seed=s), x0=x0,
                         true_x=x).errors ** 2 for s in range(200)])
    bound = (1 - 1 / R) ** k * float(np.sum((x0 - x) ** 2))
    ratio = sq.mean(axis=0) / bound
    assert np.all(ratio <= 1.2), float(ratio.max())


def _unit_points(count, n, seed):
    pts = RngState(seed).normal(count * n).reshape(count, n)
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def test_criterion_03_jl_distances():
    delta, size, n = 0.3, 1000, 1000
    d = jl_dimension(delta, size, 8)
    assert d == math.ceil(8 * math.log(size) / delta ** 2)
    ratios = pairwise_sq_distance_ratios(build_sketch(RngState(31), n, d),
                                         _unit_points(size, n, 30))
    inside = np.mean((ratios >= 1 - delta) & (ratios <= 1 + delta))
    assert inside >= 0.95, inside


def test_criterion_04_jl_inner_products():
    delta, size, n = 0.3, 1000, 1000
    d = jl_dimension(delta, size, 8)
    errs = pairwise_inner_product_errors(build_sketch(RngState(41), n, d),
                                         _unit_points(size, n, 40))
    assert np.mean(errs <= 2 * delta) >= 0.95


def test_criterion_05_p_vector_exact():
    for m in range(1, 13):
        for n in range(1, m + 1):
            assert list(p_vector(m, n, exact=True).probabilities) == enumerate_p(m, n)
            diff = p_vector(m, n).as_array() - np.array([float(f) for f in enumerate_p(m, n)])
            assert np.max(np.abs(diff)) <= 1e-12


def test_criterion_06_greedy_single_step():
    m, n = 20, 5
    A = RngState(60).normal(m * n).reshape(m, n)
    A /= np.linalg.norm(A, axis=1)[:, None]
    x = RngState(61).normal(n)
    system = make_system(A, A @ x)
    ss = precompute_rows(system, None, identity_sketch(n))
    xk = x + sphere_uniform(RngState(62), n)
    g = squared_step_lengths(A, system.b, xk)
    e_rk = rk_expected_error_sq(g, float(np.sum((xk - x) ** 2)))
    bound = theorem1_bound(g, p_vector(m, n), 0.0, e_rk)
    cfg = SolverConfig(method="rkjl", candidate_set_size=n, replacement="without")
    rng = RngState(63)
    state = IterateState(xk, phix=xk.copy())
    samples = np.array([np.sum((step_rkjl(state, ss, cfg, rng).x - x) ** 2)
                        for _ in range(10**5)])
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    assert samples.mean() <= bound + 3 * se, (samples.mean(), bound, se)


def test_criterion_07_oracle_dominates_rk():
    spec = ProblemSpec(m=6000, n=100, model="bernoulli", mode="homogeneous", seed=70)
    res = run_comparison(spec, ["rk", "oracle"], 20, SolverConfig(max_iterations=1000))
    rk, oracle = res.median_curve("rk"), res.median_curve("oracle")
    assert len(rk) == len(oracle) == 1001
    assert np.all(oracle <= rk)
    assert oracle[100] < rk[100]


def test_criterion_08_d_sweep_monotone():
    spec = ProblemSpec(m=6000, n=100, model="bernoulli", mode="homogeneous", seed=80)
    res = run_d_sweep(spec, [5, 20, 100], SolverConfig(max_iterations=3000), trials=20,
                      threshold=1e-3)
    its = res.extras["iterations_to_threshold"]
    med = [float(np.median(its[f"rkjl[d={d}]"])) for d in (5, 20, 100)]
    print("median iterations to 1e-3:", med)
    assert all(math.isfinite(v) for v in med)
    assert med[0] >= med[1] >= med[2]


def test_criterion_09_noisy_floor():
    spec = ProblemSpec(m=500, n=20, model="gaussian", normalize_rows=True, mode="noisy",
                       noise_scale=0.01, seed=90)
    res = run_noise_experiment(spec, SolverConfig(max_iterations=200), trials=50)
    for t, trace in enumerate(res.traces["rk"]):
        (A, b, x), x0 = trial_problem(spec, t)
        R, gamma = res.extras["R"][t], res.extras["gamma"][t]
        k = len(trace) - 1
        assert k == 200
        limit = math.sqrt(R) * gamma + (1 - 1 / R) ** (k / 2) * np.linalg.norm(x0 - x)
        assert trace.errors[-1] <= limit, (t, trace.errors[-1], limit)


def test_criterion_10_select_cost_linear_in_d():
    times = time_select_phase(1000, [25, 50, 100])
    ratios = [times[50] / times[25], times[100] / times[50]]
    print("select ns/iteration:", times, "ratios:", ratios)
    assert all(1.5 <= r <= 3.0 for r in ratios), ratios


def test_criterion_11_cli_determinism(tmp_path, capsys):
    def invoke(root):
        root.mkdir()
        data = root / "sys"
        cmds = [
            ["gen", "--m", 300, "--n", 15, "--model", "gaussian", "--mode", "planted",
             "--seed", 4, "--out", data],
            ["solve", "--A", data / "A.rkmx", "--b", data / "b.rkmx", "--x-true",
             data / "x.rkmx", "--method", "rkjl", "--d", 6, "--seed", 2, "--x0", "sphere",
             "--trace-out", root / "solve.csv"],
            ["bound", "--A", data / "A.rkmx", "--k-max", 30, "--curve-out", root / "bound.csv"],
            ["compare", "--methods", "rk,rkjl,oracle,cyclic", "--m", 300, "--n", 15,
             "--trials", 3, "--seed", 5, "--out", root / "cmp.csv", "--svg", root / "cmp.svg"],
            ["sweep", "--d", "2,5,15", "--m", 300, "--n", 15, "--trials", 3, "--seed", 6,
             "--out", root / "sweep.csv", "--svg", root / "sweep.svg"],
            ["noise", "--trials", 3, "--seed", 7, "--out", root / "noise.csv",
             "--svg", root / "noise.svg"],
            ["plot", "--csv", root / "cmp.csv", "--svg", root / "plot.svg"],
        ]
        for cmd in cmds:
            assert main([str(c) for c in cmd]) == 0, cmd
        capsys.readouterr()
        return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*"))
                if p.is_file()}

    a, b = invoke(tmp_path / "a"), invoke(tmp_path / "b")
    assert sorted(a) == sorted(b)
    assert len(a) == 13
    for name in a:
        assert a[name] == b[name], name
