import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkjl.errors import DimensionError, ParameterError
from rkjl.linalg import RngState, make_system, sphere_uniform
from rkjl.sketch import (
    apply_sketch,
    build_sketch,
    distortion_report,
    identity_sketch,
    jl_dimension,
    pairwise_sq_distance_ratios,
    precompute_rows,
    update_sketched_iterate,
)
from rkjl.solvers import SolverConfig

from conftest import random_consistent


def test_jl_dimension_examples():
    assert jl_dimension(0.5, 2, 8) == 23
    assert jl_dimension(0.3, 10**4, 8) == 819
    assert jl_dimension(0.5, 2) == 23  # C defaults to 8
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ParameterError):
            jl_dimension(bad, 10)
    with pytest.raises(ParameterError):
        jl_dimension(0.5, 1)


@settings(max_examples=100)
@given(st.floats(0.01, 0.99), st.integers(2, 10**9), st.floats(0.1, 20))
def test_jl_dimension_is_smallest_admissible(delta, size, c):
    d = jl_dimension(delta, size, c)
    bound = c * math.log(size) / delta ** 2
    assert d >= bound - 1e-9
    assert d - 1 < bound + 1e-9


def test_isometry_in_expectation():
    n, d = 40, 10
    x = sphere_uniform(RngState(1), n)
    rng = RngState(2)
    ratios = [np.sum(apply_sketch(build_sketch(rng, n, d), x) ** 2) for _ in range(10**4)]
    assert abs(np.mean(ratios) - 1) <= 0.05


def test_entry_variance():
    sk = build_sketch(RngState(3), 1000, 100)
    assert sk.matrix.shape == (100, 1000)
    assert abs(sk.matrix.var() * 100 - 1) <= 0.1


def test_identity_sketch_is_exact():
    sk = identity_sketch(5)
    x = RngState(4).normal(5)
    assert np.array_equal(apply_sketch(sk, x), x)


def test_apply_sketch_basic():
    sk = build_sketch(RngState(5), 30, 8)
    assert np.all(apply_sketch(sk, np.zeros(30)) == 0)
    with pytest.raises(DimensionError):
        apply_sketch(sk, np.zeros(29))


def test_apply_sketch_linear():
    rng = RngState(6)
    sk = build_sketch(rng, 50, 12)
    worst = 0.0
    for _ in range(100):
        u, v = rng.normal(50), rng.normal(50)
        c = rng.normal(1)[0] * 10
        err = np.linalg.norm(apply_sketch(sk, c * u + v) - c * apply_sketch(sk, u)
                             - apply_sketch(sk, v))
        worst = max(worst, err / (np.linalg.norm(u) + np.linalg.norm(v)))
    assert worst <= 1e-10


def test_parallelogram_identity():
    rng = RngState(7)
    sk = build_sketch(rng, 60, 20)
    for _ in range(50):
        pa, px = apply_sketch(sk, rng.normal(60)), apply_sketch(sk, rng.normal(60))
        lhs = pa @ px
        rhs = 0.25 * (np.sum((pa + px) ** 2) - np.sum((pa - px) ** 2))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs), np.linalg.norm(pa) * np.linalg.norm(px))


def test_norm_distortion_at_jl_dimension():
    delta, count, n = 0.3, 100, 400
    d = jl_dimension(delta, count)
    rng = RngState(8)
    xs = np.array([sphere_uniform(rng, n) for _ in range(count)])
    sk = build_sketch(rng, n, d)
    sq = np.sum(apply_sketch(sk, xs.T) ** 2, axis=0)
    assert np.mean((sq >= 1 - delta) & (sq <= 1 + delta)) >= 0.95
    ratios = pairwise_sq_distance_ratios(sk, xs)
    assert np.mean((ratios >= 1 - delta) & (ratios <= 1 + delta)) >= 0.95


def test_precompute_rows():
    system, _ = random_consistent(9, 30, 6)
    sk = identity_sketch(6)
    ss = precompute_rows(system.A, system.b, sk)
    assert np.array_equal(ss.alphas, system.A)
    sk = build_sketch(RngState(10), 6, 4)
    ss = precompute_rows(system, None, sk)
    rng = RngState(11)
    for i in (int(v) for v in rng.raw(10) % 30):
        assert np.array_equal(ss.alphas[i], ss.alphas[i])
        assert np.allclose(ss.alphas[i], sk.matrix @ system.A[i], rtol=1e-13, atol=1e-13)
    assert np.allclose(ss.row_norms, np.linalg.norm(system.A, axis=1), rtol=1e-12)
    assert np.allclose(ss.alpha_norms, np.linalg.norm(ss.alphas, axis=1), rtol=1e-12)
    with pytest.raises(DimensionError):
        precompute_rows(system, None, build_sketch(RngState(0), 5, 4))


def test_recompute_alpha_bit_exact():
    # row-by-row recomputation through the same batched product is bit-identical
    system, _ = random_consistent(12, 50, 20)
    sk = build_sketch(RngState(13), 20, 7)
    ss = precompute_rows(system, None, sk)
    again = precompute_rows(system, None, sk)
    assert np.array_equal(ss.alphas, again.alphas)


@pytest.mark.slow
def test_precompute_time_linear_in_d():
    m, n = 20000, 100
    system = make_system(RngState(14).normal(m * n).reshape(m, n), np.zeros(m))
    times = {}
    for d in (25, 50, 100):
        sk = build_sketch(RngState(15), n, d)
        best = math.inf
        for _ in range(7):
            t0 = time.perf_counter()
            precompute_rows(system, None, sk)
            best = min(best, time.perf_counter() - t0)
        times[d] = best
    per_doubling = math.sqrt(times[100] / times[25])
    assert 1.5 <= per_doubling <= 3.0, times


def test_update_sketched_iterate():
    rng = RngState(16)
    sk = build_sketch(rng, 25, 6)
    x, a = rng.normal(25), rng.normal(25)
    phix, pa = apply_sketch(sk, x), apply_sketch(sk, a)
    assert np.array_equal(update_sketched_iterate(phix, pa, 0.0), phix)
    assert np.allclose(update_sketched_iterate(phix, pa, 0.7), apply_sketch(sk, x + 0.7 * a),
                       rtol=1e-12, atol=1e-12)
    with pytest.raises(DimensionError):
        update_sketched_iterate(phix, np.zeros(5), 1.0)


def test_incremental_drift_over_many_updates():
    system, _ = random_consistent(17, 200, 10)
    sk = build_sketch(RngState(18), 10, 5)
    ss = precompute_rows(system, None, sk)
    rng = RngState(19)
    x = np.zeros(10)
    phix = apply_sketch(sk, x)
    for _ in range(100):
        j = int(rng.raw(1)[0] % 200)
        coeff = (ss.b[j] - ss.A[j] @ x) / ss.row_norms_sq[j]
        x = x + coeff * ss.A[j]
        phix = update_sketched_iterate(phix, ss.alphas[j], coeff)
    fresh = apply_sketch(sk, x)
    assert np.linalg.norm(phix - fresh) <= 1e-8 * np.linalg.norm(fresh)


def test_solver_sketched_iterate_stays_consistent():
    # 10 n iterations with the default refresh period
    system, x_true = random_consistent(20, 300, 15)
    cfg = SolverConfig(method="rkjl", max_iterations=150, sketch_dim=8, seed=1)
    from rkjl.solvers import IterateState, prepare_system, step_rkjl
    ss = prepare_system(system, None, cfg)
    state = IterateState(np.zeros(15))
    rng = RngState(1)
    for _ in range(150):
        state = step_rkjl(state, ss, cfg, rng)
        fresh = apply_sketch(ss.sketch, state.x)
        assert np.linalg.norm(state.phix - fresh) <= 1e-8 * max(np.linalg.norm(fresh), 1e-300)


def test_distortion_report():
    rng = RngState(21)
    a, x = rng.normal(30), rng.normal(30)
    rep = distortion_report(identity_sketch(30), [(a, x), (x, a)], 0.1)
    assert np.all(rep.errors == 0) and rep.fraction_exceeding == 0
    sk = build_sketch(rng, 30, 10)
    rep = distortion_report(sk, [(a, np.zeros(30))], 0.1)
    assert rep.errors[0] == 0


def test_inner_product_distortion_at_jl_dimension():
    delta, n = 0.3, 300
    d = jl_dimension(delta, 1000)
    rng = RngState(22)
    left = np.array([sphere_uniform(rng, n) for _ in range(1000)])
    right = np.array([sphere_uniform(rng, n) for _ in range(1000)])
    rep = distortion_report(build_sketch(rng, n, d), (left, right), delta)
    assert 1 - rep.fraction_exceeding >= 0.95
