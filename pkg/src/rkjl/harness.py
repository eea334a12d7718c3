"""
Problem generation, paired-seed experiments and their persistence.

Every random quantity in an experiment is drawn from its own stream
``RngState(spec.seed, derive_stream(trial, purpose))``, so all methods in one
trial see bit-identical ``(A, b, x0)`` and results do not depend on the order
(or process) in which trials run.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import struct
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .analysis import compute_R, gamma_of_noise, noisy_rk_bound
from .errors import FormatError, ParameterError, RKJLError
from .linalg import RngState, as_matrix, make_system, norm2, row_norms_sq, sphere_uniform
from .solvers import (
    STREAM_PROBLEM,
    STREAM_SOLVER,
    STREAM_X0,
    SolverConfig,
    derive_stream,
    prepare_system,
    solve,
)

log = logging.getLogger(__name__)

MODELS = ("bernoulli", "gaussian")
MODES = ("homogeneous", "planted", "noisy")


@dataclass(frozen=True)
class ProblemSpec:
    m: int = 6000
    n: int = 100
    model: str = "bernoulli"
    normalize_rows: bool = False
    mode: str = "homogeneous"
    noise_scale: float = 0.0
    seed: int = 0

    def validate(self):
        if self.n < 1 or self.m < self.n:
            raise ParameterError(f"need m >= n >= 1, got m={self.m}, n={self.n}")
        if self.model not in MODELS:
            raise ParameterError(f"unknown model {self.model!r}")
        if self.mode not in MODES:
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.noise_scale < 0:
            raise ParameterError("noise_scale must be nonnegative")


class Problem(NamedTuple):
    A: np.ndarray
    b: np.ndarray
    true_x: np.ndarray


def generate_problem(spec: ProblemSpec, rng: RngState) -> Problem:
    """Draw ``A`` from the entry model and build ``b`` for the consistency mode.

    ``noisy`` adds ``w_i = noise_scale * ||a_i|| * u_i`` with ``u_i`` uniform
    on ``[-1, 1]``, so ``max_i |w_i| / ||a_i|| <= noise_scale``.
    """
    spec.validate()
    m, n = spec.m, spec.n
    if spec.model == "bernoulli":
        bits = rng.raw(m * n) & np.uint64(1)
        A = 2.0 * bits.astype(np.float64).reshape(m, n) - 1.0
    else:
        A = rng.normal(m * n).reshape(m, n)
    norms = np.sqrt(row_norms_sq(A))
    if spec.normalize_rows:
        A = A / np.where(norms > 0, norms, 1.0)[:, None]
        norms = np.sqrt(row_norms_sq(A))

    if spec.mode == "homogeneous":
        return Problem(A, np.zeros(m), np.zeros(n))
    true_x = rng.normal(n)
    b = A @ true_x
    if spec.mode == "noisy":
        if np.any(norms == 0):
            raise ParameterError("noisy mode with zero rows: gamma is undefined")
        b = b + spec.noise_scale * norms * (2.0 * rng.uniform(m) - 1.0)
    return Problem(A, b, true_x)


def trial_problem(spec: ProblemSpec, trial: int) -> tuple[Problem, np.ndarray]:
    """The problem and sphere-uniform ``x0`` shared by all methods of a trial."""
    problem = generate_problem(spec, RngState(spec.seed, derive_stream(trial, STREAM_PROBLEM)))
    x0 = sphere_uniform(RngState(spec.seed, derive_stream(trial, STREAM_X0)), spec.n)
    return problem, x0


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

@dataclass
class Arm:
    """One curve group of an experiment: a method plus its settings."""

    label: str
    config: SolverConfig
    identity_sketch: bool = False


@dataclass
class ExperimentResult:
    spec: ProblemSpec
    labels: list
    traces: dict  # label -> list[SolveTrace | None], indexed by trial
    timing: dict = field(default_factory=dict)  # label -> phase -> total ns
    failures: dict = field(default_factory=dict)  # (label, trial) -> message
    extras: dict = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return max((len(v) for v in self.traces.values()), default=0)

    def error_curves(self, label: str) -> list:
        return [t.errors for t in self.traces[label] if t is not None]

    def median_curve(self, label: str) -> np.ndarray:
        return summarize_curves(self.error_curves(label))[0]

    def mean_curve(self, label: str) -> np.ndarray:
        return summarize_curves(self.error_curves(label))[1]


def summarize_curves(curves: list) -> tuple[np.ndarray, np.ndarray]:
    """Per-iteration median and mean over trials.

    Curves that stopped early are padded with their last value, so every
    trial contributes at every iteration of the common grid.
    """
    if not curves:
        return np.empty(0), np.empty(0)
    length = max(len(c) for c in curves)
    grid = np.empty((len(curves), length))
    for i, c in enumerate(curves):
        grid[i, :len(c)] = c
        grid[i, len(c):] = c[-1]
    return np.median(grid, axis=0), np.mean(grid, axis=0)


def _run_trial(spec: ProblemSpec, arms: list, trial: int):
    (A, b, true_x), x0 = trial_problem(spec, trial)
    base = make_system(A, b)
    out = {}
    for arm in arms:
        cfg = replace(arm.config, seed=spec.seed, stream=derive_stream(trial, STREAM_SOLVER))
        try:
            t0 = time.perf_counter_ns()
            system = prepare_system(base, None, cfg, identity=arm.identity_sketch)
            prep = time.perf_counter_ns() - t0
            trace = solve(system, cfg, x0=x0, true_x=true_x)
            out[arm.label] = (trace, prep, None)
        except RKJLError as exc:
            out[arm.label] = (None, 0, str(exc))
    return trial, out


def run_arms(spec: ProblemSpec, arms: list, trials: int, jobs: int = 1) -> ExperimentResult:
    if not arms:
        raise ParameterError("need at least one method")
    if trials < 1:
        raise ParameterError("need at least one trial")
    labels = [a.label for a in arms]
    if len(set(labels)) != len(labels):
        raise ParameterError(f"duplicate arm labels: {labels}")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_trial, spec, arms, t) for t in range(trials)]
            done = [f.result() for f in futures]
    else:
        done = [_run_trial(spec, arms, t) for t in range(trials)]

    result = ExperimentResult(spec, labels, {lab: [None] * trials for lab in labels})
    for lab in labels:
        result.timing[lab] = {"preprocess": 0, "sample": 0, "select": 0, "test": 0, "project": 0}
    for trial, per_arm in sorted(done, key=lambda item: item[0]):
        for lab, (trace, prep, err) in per_arm.items():
            if err is not None:
                log.warning("trial %d, %s failed: %s", trial, lab, err)
                result.failures[(lab, trial)] = err
                continue
            result.traces[lab][trial] = trace
            timing = result.timing[lab]
            timing["preprocess"] += prep
            for phase, ns in trace.phase_ns.items():
                timing[phase] += ns
    return result


def run_comparison(spec: ProblemSpec, methods: list, trials: int, config: SolverConfig,
                   jobs: int = 1) -> ExperimentResult:
    """Paired trials of each method on identical problems and starting points.

    Repeating a method name gives independent arms labelled ``name#2``... that
    still share the trial's seeds.
    """
    arms, seen = [], {}
    for method in methods:
        seen[method] = seen.get(method, 0) + 1
        label = method if seen[method] == 1 else f"{method}#{seen[method]}"
        arms.append(Arm(label, replace(config, method=method)))
    return run_arms(spec, arms, trials, jobs)


def iterations_to_threshold(errors: np.ndarray, threshold: float) -> float:
    hit = np.flatnonzero(errors <= threshold)
    return float(hit[0]) if len(hit) else math.inf


def run_d_sweep(spec: ProblemSpec, d_values: list, config: SolverConfig, trials: int = 20,
                threshold: float = 1e-3, identity_hook: bool = False,
                jobs: int = 1) -> ExperimentResult:
    """RKJL once per sketch dimension, paired across ``d``.

    With ``identity_hook`` an entry ``d == n`` uses the exact identity sketch.
    ``extras['iterations_to_threshold'][label]`` lists the first iteration per
    trial whose error is at most ``threshold`` (``inf`` if never reached).
    """
    if not d_values:
        raise ParameterError("need at least one d value")
    arms = []
    for d in d_values:
        if d < 1:
            raise ParameterError(f"d must be at least 1, got {d}")
        arms.append(Arm(f"rkjl[d={d}]", replace(config, method="rkjl", sketch_dim=d),
                        identity_sketch=identity_hook and d == spec.n))
    result = run_arms(spec, arms, trials, jobs)
    result.extras["threshold"] = threshold
    result.extras["iterations_to_threshold"] = {
        lab: [iterations_to_threshold(t.errors, threshold) if t is not None else math.inf
              for t in result.traces[lab]]
        for lab in result.labels
    }
    return result


def run_noise_experiment(spec: ProblemSpec, config: SolverConfig, trials: int = 50,
                         jobs: int = 1) -> ExperimentResult:
    """RK on ``b = A x + w`` with the noisy-RK bound attached per trial.

    ``extras`` carries per-trial ``R``, ``gamma``, ``floor = sqrt(R) gamma``
    and ``bound`` curves ``(1-1/R)^(k/2) ||x0 - x|| + floor``.
    """
    if spec.mode != "noisy":
        raise ParameterError("noise experiment needs a noisy problem spec")
    result = run_arms(spec, [Arm(config.method, config)], trials, jobs)
    label = result.labels[0]
    Rs, gammas, floors, bounds = [], [], [], []
    for trial in range(trials):
        (A, b, true_x), x0 = trial_problem(spec, trial)
        R = compute_R(A).R
        gamma = gamma_of_noise(A, b - A @ true_x)
        trace = result.traces[label][trial]
        ks = trace.iterations if trace is not None else np.arange(config.max_iterations + 1)
        e0 = norm2(x0 - true_x)
        Rs.append(R)
        gammas.append(gamma)
        floors.append(math.sqrt(R) * gamma)
        bounds.append(np.array([noisy_rk_bound(R, e0, int(k), gamma) for k in ks]))
    result.extras.update(R=Rs, gamma=gammas, floor=floors, bound=bounds)
    return result


def time_select_phase(n: int, d_values: list, m: int | None = None, iterations: int = 200,
                      repeats: int = 7, seed: int = 0) -> dict:
    """Best-of-``repeats`` RKJL select-phase nanoseconds per iteration for each ``d``.

    Uses the faithful per-iteration ``Phi x_k`` recomputation, so the select
    phase does ``O(n d)`` work: the sketch multiply plus ``n`` candidate
    scores of length ``d``.  Drawing the candidate indices is timed
    separately (the ``sample`` phase) since it does not depend on ``d``.
    """
    m = m or 4 * n
    spec = ProblemSpec(m=m, n=n, model="gaussian", normalize_rows=True, mode="planted",
                       seed=seed)
    (A, b, true_x), x0 = trial_problem(spec, 0)
    base = make_system(A, b)
    out = {}
    for d in d_values:
        cfg = SolverConfig(method="rkjl", max_iterations=iterations, sketch_dim=d, seed=seed,
                           recompute_sketch=True, profile=True)
        system = prepare_system(base, None, cfg)
        samples = []
        for _ in range(repeats):
            trace = solve(system, cfg, x0=x0)
            samples.append(trace.phase_ns["select"] / (len(trace) - 1))
        out[d] = float(min(samples))  # min filters scheduler noise
    return out


# ---------------------------------------------------------------------------
# Binary matrix files
# ---------------------------------------------------------------------------

MAGIC = b"RKMX"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def write_matrix(path, A) -> None:
    """Write ``A`` as magic, u32 version, u64 rows, u64 cols, f64 row-major data
    (all little-endian).  Vectors are stored as single-column matrices."""
    a = np.asarray(A, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    a = as_matrix(a)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, a.shape[0], a.shape[1]))
        fh.write(a.astype("<f8").tobytes())


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header", offset=len(data))
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}, expected {VERSION}", offset=4)
    expected = rows * cols * 8
    body = len(data) - _HEADER.size
    if body < expected:
        raise FormatError(f"{path}: truncated data, expected {expected} bytes, found {body}",
                          offset=len(data))
    if body > expected:
        raise FormatError(f"{path}: {body - expected} trailing bytes",
                          offset=_HEADER.size + expected)
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).astype(
        np.float64)


def read_vector(path) -> np.ndarray:
    a = read_matrix(path)
    if a.shape[1] != 1:
        raise FormatError(f"{path}: expected a single-column matrix, got {a.shape}")
    return a[:, 0].copy()


# ---------------------------------------------------------------------------
# CSV traces
# ---------------------------------------------------------------------------

CSV_HEADER = ("method", "trial", "iteration", "error", "residual", "elapsed_ns")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def export_traces_csv(result: ExperimentResult, path, include_timing: bool = False) -> None:
    """One row per (method, trial, iteration), methods in label order.

    ``elapsed_ns`` is written as 0 unless ``include_timing`` is set, which
    keeps the file byte-for-byte reproducible.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for label in result.labels:
        for trial, trace in enumerate(result.traces[label]):
            if trace is None:
                continue
            elapsed = trace.elapsed_ns if include_timing else np.zeros(len(trace), np.int64)
            for k, err, res, ns in zip(trace.iterations, trace.errors, trace.residuals, elapsed):
                writer.writerow((label, trial, int(k), _fmt(err), _fmt(res), int(ns)))
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_traces_csv(path) -> dict:
    """``{method: {trial: errors}}`` from a trace CSV, preserving file order."""
    out: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise FormatError(f"{path}: unexpected header {header}")
        for row in reader:
            label, trial, _, err = row[0], int(row[1]), row[2], float(row[3])
            out.setdefault(label, {}).setdefault(trial, []).append(err)
    return {lab: {t: np.array(v) for t, v in trials.items()} for lab, trials in out.items()}


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

LOG_FLOOR = 1e-16
_COLORS = ("#1f4e79", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#16a085", "#7f8c8d")


@dataclass
class PlotOptions:
    width: int = 640
    height: int = 420
    title: str = "l2 error vs iteration"
    max_points: int = 400
    floor: float = LOG_FLOOR
    dashed: tuple = ("rk",)


def render_convergence_svg(series, path, options: PlotOptions | None = None) -> str:
    """Static log-y line chart, one polyline per series.

    ``series`` is an :class:`ExperimentResult` (median curves are drawn) or a
    mapping ``label -> error curve``.  Values at or below ``options.floor`` are
    clamped to it and the chart carries a warning line.
    """
    opt = options or PlotOptions()
    if isinstance(series, ExperimentResult):
        series = {lab: series.median_curve(lab) for lab in series.labels}
    series = {k: np.asarray(v, dtype=np.float64) for k, v in series.items() if len(v)}
    if not series:
        raise ParameterError("nothing to plot")

    clamped = False
    logs = {}
    for label, y in series.items():
        y = y.copy()
        finite = np.isfinite(y)
        low = finite & (y < opt.floor)
        if np.any(low):
            clamped = True
            y[low] = opt.floor
        logs[label] = np.where(finite, np.log10(np.where(finite, y, 1.0)), np.nan)
    if clamped:
        warnings.warn(f"non-positive or tiny errors clamped to {opt.floor:g} on the log axis")

    all_logs = np.concatenate([v[np.isfinite(v)] for v in logs.values()])
    if len(all_logs) == 0:
        all_logs = np.array([math.log10(opt.floor)])
    y_lo = math.floor(all_logs.min())
    y_hi = math.ceil(all_logs.max())
    if y_hi == y_lo:
        y_hi += 1
    x_hi = max(len(v) for v in logs.values()) - 1 or 1

    left, right, top, bottom = 70, 150, 40, 50
    pw = opt.width - left - right
    ph = opt.height - top - bottom

    def px(k):
        return left + pw * k / x_hi

    def py(v):
        return top + ph * (y_hi - v) / (y_hi - y_lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {opt.width} {opt.height}" '
        f'width="{opt.width}" height="{opt.height}">',
        f'<rect x="0" y="0" width="{opt.width}" height="{opt.height}" fill="white"/>',
        f'<text x="{opt.width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{_esc(opt.title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    step = max(1, math.ceil((y_hi - y_lo) / 10))
    for e in range(y_lo, y_hi + 1, step):
        y = py(e)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" '
                   f'stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">1e{e}</text>')
    for i in range(5):
        k = round(x_hi * i / 4)
        out.append(f'<text x="{px(k):.2f}" y="{top + ph + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{k}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{opt.height - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">iteration</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">l2 error</text>')

    for idx, (label, v) in enumerate(logs.items()):
        color = _COLORS[idx % len(_COLORS)]
        stride = max(1, math.ceil(len(v) / opt.max_points))
        ks = list(range(0, len(v), stride))
        if ks[-1] != len(v) - 1:
            ks.append(len(v) - 1)
        pts = " ".join(f"{px(k):.2f},{py(v[k]):.2f}" for k in ks if np.isfinite(v[k]))
        dash = ' stroke-dasharray="6 4"' if label.split("#")[0] in opt.dashed else ""
        out.append(f'<polyline class="series" data-label="{_esc(label)}" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>')
        ly = top + 14 + 18 * idx
        lx = left + pw + 10
        out.append(f'<line class="legend" x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{lx + 30}" y="{ly}" font-family="sans-serif" '
                   f'font-size="11">{_esc(label)}</text>')
    if clamped:
        out.append(f'<text class="warning" x="{left + 4}" y="{top + ph - 6}" '
                   f'font-family="sans-serif" font-size="10" fill="#c0392b">'
                   f'values clamped at {opt.floor:g}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return text


def _esc(s: str) -> str:
    return (str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))
