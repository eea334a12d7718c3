"""
Gaussian Johnson-Lindenstrauss sketches of the rows of ``A``.

The sketch ``Phi`` is ``d x n`` with i.i.d. N(0, 1/d) entries, so that
``E ||Phi x||^2 = ||x||^2`` and sketched inner products estimate the exact
ones without rescaling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .linalg import LinearSystem, RngState, as_matrix, make_system, row_norms_sq, score_table

DEFAULT_C = 8.0


def jl_dimension(delta: float, set_size: int, constant_c: float = DEFAULT_C) -> int:
    """Smallest integer ``d >= C log(set_size) / delta**2`` (natural log)."""
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    if set_size < 2:
        raise ParameterError(f"set_size must be at least 2, got {set_size}")
    if constant_c <= 0:
        raise ParameterError(f"C must be positive, got {constant_c}")
    return int(math.ceil(constant_c * math.log(set_size) / delta ** 2))


@dataclass(frozen=True)
class GaussianSketch:
    matrix: np.ndarray
    d: int
    n: int


def build_sketch(rng: RngState, n: int, d: int) -> GaussianSketch:
    if d < 1 or n < 1:
        raise ParameterError(f"sketch needs d >= 1 and n >= 1, got d={d}, n={n}")
    phi = rng.normal(d * n).reshape(d, n) / math.sqrt(d)
    phi.flags.writeable = False
    return GaussianSketch(phi, d, n)


def identity_sketch(n: int) -> GaussianSketch:
    """Exact (``delta = 0``) sketch; a test hook, not a random projection."""
    phi = np.eye(n)
    phi.flags.writeable = False
    return GaussianSketch(phi, n, n)


def apply_sketch(sketch: GaussianSketch, x: np.ndarray) -> np.ndarray:
    if x.shape[0] != sketch.n:
        raise DimensionError(f"sketch expects length {sketch.n}, got {x.shape[0]}")
    return sketch.matrix @ x


@dataclass(frozen=True)
class SketchedSystem(LinearSystem):
    """A linear system plus its sketched rows ``alphas[i] = Phi a_i``."""

    sketch: GaussianSketch = None
    alphas: np.ndarray = None
    alpha_norms: np.ndarray = None
    sketch_scores: np.ndarray = None  # score_table of the alphas


def precompute_rows(A, b, sketch: GaussianSketch) -> SketchedSystem:
    """Sketch every row of ``A``; cost ``O(m n d)``."""
    base = A if isinstance(A, LinearSystem) else make_system(A, b)
    if sketch.n != base.A.shape[1]:
        raise DimensionError(
            f"sketch source dimension {sketch.n} != number of columns {base.A.shape[1]}")
    alphas = np.ascontiguousarray(base.A @ sketch.matrix.T)
    alphas.flags.writeable = False
    norms = np.sqrt(row_norms_sq(alphas))
    return SketchedSystem(
        base.A, base.b, base.row_norms_sq, base.row_norms, base.distribution,
        sketch=sketch, alphas=alphas, alpha_norms=norms,
        sketch_scores=score_table(alphas, norms, base.b),
    )


def update_sketched_iterate(state: np.ndarray, sketched_row: np.ndarray,
                            coeff: float) -> np.ndarray:
    """``Phi x_{k+1} = Phi x_k + coeff * Phi a_j`` in ``O(d)``."""
    if state.shape != sketched_row.shape:
        raise DimensionError(f"length mismatch: {state.shape} vs {sketched_row.shape}")
    return state + coeff * sketched_row


@dataclass(frozen=True)
class DistortionReport:
    errors: np.ndarray
    threshold: float
    fraction_exceeding: float


def distortion_report(sketch: GaussianSketch, pairs, delta: float) -> DistortionReport:
    """Inner-product error ``|<Phi a, Phi x> - <a, x>|`` for each ``(a, x)``.

    ``pairs`` is either an iterable of ``(a, x)`` tuples or a tuple of two
    ``(k, n)`` arrays.  The threshold is ``2 delta``.
    """
    if isinstance(pairs, tuple) and len(pairs) == 2 and np.ndim(pairs[0]) == 2:
        left, right = as_matrix(pairs[0]), as_matrix(pairs[1])
    else:
        pairs = list(pairs)
        if not pairs:
            return DistortionReport(np.empty(0), 2 * delta, 0.0)
        left = as_matrix([p[0] for p in pairs])
        right = as_matrix([p[1] for p in pairs])
    if left.shape != right.shape or left.shape[1] != sketch.n:
        raise DimensionError("every vector must have length n")
    exact = np.einsum("ij,ij->i", left, right)
    sketched = np.einsum("ij,ij->i", left @ sketch.matrix.T, right @ sketch.matrix.T)
    errors = np.abs(sketched - exact)
    return DistortionReport(errors, 2 * delta, float(np.mean(errors > 2 * delta)))


def pairwise_sq_distance_ratios(sketch: GaussianSketch, points) -> np.ndarray:
    """``||Phi s_i - Phi s_j||^2 / ||s_i - s_j||^2`` over all pairs ``i < j``."""
    s = as_matrix(points)
    ps = s @ sketch.matrix.T
    iu = np.triu_indices(len(s), k=1)
    return _sq_distances(ps)[iu] / _sq_distances(s)[iu]


def _sq_distances(x: np.ndarray) -> np.ndarray:
    g = x @ x.T
    sq = np.diag(g)
    return sq[:, None] + sq[None, :] - 2.0 * g


def pairwise_inner_product_errors(sketch: GaussianSketch, points) -> np.ndarray:
    """``|<Phi s_i, Phi s_j> - <s_i, s_j>|`` over all pairs ``i < j``."""
    s = as_matrix(points)
    if s.shape[1] != sketch.n:
        raise DimensionError(f"points have length {s.shape[1]}, sketch expects {sketch.n}")
    ps = s @ sketch.matrix.T
    iu = np.triu_indices(len(s), k=1)
    return np.abs(ps @ ps.T - s @ s.T)[iu]
