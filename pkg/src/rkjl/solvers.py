"""
Row-action solvers for consistent overdetermined systems ``A x = b``.

Four methods share one projection kernel and one tracing contract:

``cyclic``  rows visited in order ``k mod m``
``rk``      one row drawn with probability ``||a_i||^2 / ||A||_F^2``
``rkjl``    ``s`` candidate rows drawn as in ``rk``, ranked by sketched
            scores ``|b_i - <Phi a_i, Phi x_k>| / ||Phi a_i||``, with an exact
            recheck of the winner against the first candidate
``oracle``  as ``rkjl`` but ranked by exact scores (the ``delta -> 0`` limit)
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError, ProjectionError
from .linalg import (
    LinearSystem,
    RngState,
    as_vector,
    make_system,
    norm2,
    sample_rows,
    sample_rows_without_replacement,
)
from .sketch import (
    DEFAULT_C,
    SketchedSystem,
    apply_sketch,
    build_sketch,
    identity_sketch,
    jl_dimension,
    precompute_rows,
    update_sketched_iterate,
)

METHODS = ("cyclic", "rk", "rkjl", "oracle")

# stream offsets inside one (seed, trial) block; see derive_stream
STREAM_SOLVER = 0
STREAM_SKETCH = 1
STREAM_PROBLEM = 2
STREAM_X0 = 3
STREAMS_PER_TRIAL = 16


def derive_stream(trial: int, purpose: int) -> int:
    return trial * STREAMS_PER_TRIAL + purpose


@dataclass
class SolverConfig:
    method: str = "rk"
    max_iterations: int = 1000
    error_tolerance: float = 0.0
    candidate_set_size: int | None = None  # None -> n
    sketch_dim: int | None = None  # None -> default_sketch_dim(n)
    jl_delta: float = 0.3
    jl_constant: float = DEFAULT_C
    seed: int = 0
    stream: int = STREAM_SOLVER
    replacement: str = "with"
    test_step: bool = True
    refresh_period: int | None = None  # None -> n
    recompute_sketch: bool = False
    profile: bool = False

    def validate(self, m: int, n: int) -> None:
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be at least 1")
        if not self.error_tolerance >= 0:
            raise ParameterError("error_tolerance must be nonnegative")
        if self.replacement not in ("with", "without"):
            raise ParameterError("replacement must be 'with' or 'without'")
        s = self.candidates(n)
        if s < 1:
            raise ParameterError("candidate_set_size must be at least 1")
        if self.method in ("rkjl", "oracle") and self.replacement == "without" and s > m:
            raise ParameterError(f"cannot draw {s} distinct rows from {m}")
        if self.refresh_period is not None and self.refresh_period < 1:
            raise ParameterError("refresh_period must be at least 1")
        if self.sketch_dim is not None and self.sketch_dim < 1:
            raise ParameterError("sketch_dim must be at least 1")

    def candidates(self, n: int) -> int:
        return n if self.candidate_set_size is None else self.candidate_set_size


def default_sketch_dim(n: int, delta: float = 0.3, constant_c: float = DEFAULT_C) -> int:
    """JL dimension for ``|S| = 10 n^2`` points, capped at ``n``."""
    return min(n, jl_dimension(delta, max(2, 10 * n * n), constant_c))


@dataclass(frozen=True)
class IterateState:
    x: np.ndarray
    phix: np.ndarray | None = None
    k: int = 0
    row: int = -1
    residual: float = 0.0
    skipped: bool = False


@dataclass
class SolveTrace:
    """Per-iteration record of one seeded run.

    Record ``k`` describes ``x_k``: ``rows[k]`` is the row projected onto to
    produce it and ``residuals[k] = |b[j] - <a_j, x_{k-1}>|`` for that row.
    Record 0 is the initial iterate (row -1, residual 0).  ``errors`` is
    ``||x_k - x||`` when the true solution was supplied, NaN otherwise.
    """

    method: str
    iterations: np.ndarray
    rows: np.ndarray
    errors: np.ndarray
    residuals: np.ndarray
    elapsed_ns: np.ndarray
    status: str
    x: np.ndarray
    phase_ns: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def __len__(self):
        return len(self.iterations)

    @property
    def final_error(self) -> float:
        return float(self.errors[-1])


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def project_onto_row(x_k: np.ndarray, a_j: np.ndarray, b_j: float,
                     row_norm_sq: float) -> np.ndarray:
    """Orthogonal projection of ``x_k`` onto ``{x : <a_j, x> = b_j}``."""
    if x_k.shape != a_j.shape:
        raise DimensionError(f"length mismatch: {x_k.shape} vs {a_j.shape}")
    if not row_norm_sq > 0.0:
        raise ProjectionError("projection onto a zero row is undefined")
    return x_k + ((b_j - float(a_j @ x_k)) / row_norm_sq) * a_j


def pythagorean_residual(x_k: np.ndarray, x_k1: np.ndarray, true_x: np.ndarray) -> float:
    """``||x_k - x_{k+1}||^2 - (||x - x_k||^2 - ||x - x_{k+1}||^2)``.

    Vanishes (up to rounding) for any orthogonal projection step on a
    consistent system.
    """
    step = x_k - x_k1
    e0 = true_x - x_k
    e1 = true_x - x_k1
    return float(step @ step - (e0 @ e0 - e1 @ e1))


def exact_scores(system: LinearSystem, rows: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``|b_i - <a_i, x>| / ||a_i||``: the step length if row ``i`` were used."""
    return np.abs(system.b[rows] - system.A[rows] @ x) / system.row_norms[rows]


def _project(state: IterateState, system: LinearSystem, j: int,
             sketched: SketchedSystem | None = None, refresh: int = 0,
             phix: np.ndarray | None = None) -> IterateState:
    a = system.A[j]
    r = float(system.b[j] - a @ state.x)
    coeff = r / system.row_norms_sq[j]
    x = state.x + coeff * a
    if phix is None:
        phix = state.phix
    if sketched is not None:
        if refresh and (state.k + 1) % refresh == 0:
            phix = apply_sketch(sketched.sketch, x)
        else:
            phix = update_sketched_iterate(phix, sketched.alphas[j], coeff)
    return IterateState(x, phix, state.k + 1, int(j), abs(r))


def step_cyclic(state: IterateState, system: LinearSystem) -> IterateState:
    m = system.A.shape[0]
    j = state.k % m
    if system.row_norms_sq[j] == 0.0:
        return IterateState(state.x, state.phix, state.k + 1, j, 0.0, skipped=True)
    return _project(state, system, j)


def step_rk(state: IterateState, system: LinearSystem, rng: RngState) -> IterateState:
    j = int(sample_rows(system.distribution, rng, 1)[0])
    return _project(state, system, j)


def _draw_candidates(system: LinearSystem, config: SolverConfig, rng: RngState) -> np.ndarray:
    s = config.candidates(system.A.shape[1])
    if config.replacement == "without":
        return sample_rows_without_replacement(system.distribution, rng, s)
    return sample_rows(system.distribution, rng, s)


def _greedy(cands: np.ndarray, table: np.ndarray, z: np.ndarray) -> int:
    """Candidate with the largest ``|table[i] @ [z, -1]|``; ties go to the first."""
    za = np.empty(len(z) + 1)
    za[:-1] = z
    za[-1] = -1.0
    scores = np.abs(np.take(table, cands, axis=0) @ za)
    return int(cands[int(np.argmax(scores))])


def _test(j: int, l: int, system: LinearSystem, x: np.ndarray) -> int:
    if l == j:
        return j
    gj, gl = exact_scores(system, np.array([j, l]), x)
    return l if gl > gj else j


def _select_rkjl(state, system: SketchedSystem, config, rng, timer=None):
    cands = _draw_candidates(system, config, rng)
    if timer is not None:
        timer.lap("sample")
    phix = state.phix
    if config.recompute_sketch or phix is None:
        phix = apply_sketch(system.sketch, state.x)
    j = _greedy(cands, system.sketch_scores, phix)
    if timer is not None:
        timer.lap("select")
    if config.test_step:
        j = _test(j, int(cands[0]), system, state.x)
    if timer is not None:
        timer.lap("test")
    return phix, j


def step_rkjl(state: IterateState, system: SketchedSystem, config: SolverConfig,
              rng: RngState, timer=None) -> IterateState:
    phix, j = _select_rkjl(state, system, config, rng, timer)
    refresh = 0 if config.recompute_sketch else _refresh(config, system)
    out = _project(state, system, j, system, refresh, phix)
    if timer is not None:
        timer.lap("project")
    return out


def step_oracle(state: IterateState, system: LinearSystem, config: SolverConfig,
                rng: RngState, timer=None) -> IterateState:
    cands = _draw_candidates(system, config, rng)
    if timer is not None:
        timer.lap("sample")
    j = _greedy(cands, system.score_table, state.x)
    if timer is not None:
        timer.lap("select")
    if config.test_step:
        j = _test(j, int(cands[0]), system, state.x)
    if timer is not None:
        timer.lap("test")
    out = _project(state, system, j)
    if timer is not None:
        timer.lap("project")
    return out


def _refresh(config: SolverConfig, system: LinearSystem) -> int:
    return config.refresh_period or system.A.shape[1]


class _PhaseTimer:
    def __init__(self):
        self.totals = {"sample": 0, "select": 0, "test": 0, "project": 0}
        self._t = time.perf_counter_ns()

    def start(self):
        self._t = time.perf_counter_ns()

    def lap(self, phase: str):
        now = time.perf_counter_ns()
        self.totals[phase] += now - self._t
        self._t = now


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def prepare_system(A, b, config: SolverConfig, identity: bool = False) -> LinearSystem:
    """Build the system a method needs; ``rkjl`` gets a freshly drawn sketch.

    The sketch is drawn from stream ``config.stream + STREAM_SKETCH`` so the
    solver's own stream is untouched by sketch construction.
    """
    system = A if isinstance(A, LinearSystem) else make_system(A, b)
    if config.method != "rkjl" or isinstance(system, SketchedSystem):
        return system
    n = system.A.shape[1]
    if identity:
        sketch = identity_sketch(n)
    else:
        d = config.sketch_dim or default_sketch_dim(n, config.jl_delta, config.jl_constant)
        rng = RngState(config.seed, config.stream - STREAM_SOLVER + STREAM_SKETCH)
        sketch = build_sketch(rng, n, d)
    return precompute_rows(system, None, sketch)


def solve(system: LinearSystem, config: SolverConfig, x0=None, true_x=None) -> SolveTrace:
    """Run ``config.method`` from ``x0`` (default zero) and trace every iterate.

    Stops when ``||x_k - true_x|| <= error_tolerance`` if ``true_x`` is given;
    otherwise when ``||A x_k - b|| <= error_tolerance``, checked every ``n``
    iterations; otherwise after ``max_iterations`` steps.
    """
    m, n = system.A.shape
    config.validate(m, n)
    if config.method == "rkjl" and not isinstance(system, SketchedSystem):
        raise ParameterError("rkjl needs a SketchedSystem; see prepare_system")
    x = np.zeros(n) if x0 is None else as_vector(x0, "x0").copy()
    if len(x) != n:
        raise DimensionError(f"x0 has length {len(x)}, expected {n}")
    if true_x is not None:
        true_x = as_vector(true_x, "true_x")
        if len(true_x) != n:
            raise DimensionError(f"true_x has length {len(true_x)}, expected {n}")

    rng = RngState(config.seed, config.stream)
    timer = _PhaseTimer() if config.profile else None
    method = config.method
    tol = config.error_tolerance

    def error_of(v):
        return norm2(v - true_x) if true_x is not None else math.nan

    def done(state):
        if true_x is not None:
            return error_of(state.x) <= tol
        if state.k % n == 0:
            return norm2(system.A @ state.x - system.b) <= tol
        return False

    state = IterateState(x)
    rows, errors, residuals, elapsed = [-1], [error_of(x)], [0.0], [0]
    skipped = []
    status = "budget_exhausted"
    t0 = time.perf_counter_ns()
    if done(state):
        status = "converged"
    else:
        for _ in range(config.max_iterations):
            if timer is not None:
                timer.start()
            if method == "rk":
                state = step_rk(state, system, rng)
            elif method == "oracle":
                state = step_oracle(state, system, config, rng, timer)
            elif method == "rkjl":
                state = step_rkjl(state, system, config, rng, timer)
            else:
                state = step_cyclic(state, system)
                if state.skipped:
                    skipped.append(state.k)
            rows.append(state.row)
            errors.append(error_of(state.x))
            residuals.append(state.residual)
            elapsed.append(time.perf_counter_ns() - t0)
            if done(state):
                status = "converged"
                break

    return SolveTrace(
        method=method,
        iterations=np.arange(len(rows)),
        rows=np.array(rows),
        errors=np.array(errors),
        residuals=np.array(residuals),
        elapsed_ns=np.array(elapsed, dtype=np.int64),
        status=status,
        x=state.x,
        phase_ns=dict(timer.totals) if timer is not None else {},
        skipped=skipped,
    )
