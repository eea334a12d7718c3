"""
Dense real linear algebra, a pinned random number generator and weighted
row sampling.

Vectors and matrices are plain ``numpy.ndarray`` objects of dtype float64;
``as_vector`` / ``as_matrix`` are the validating constructors used at module
boundaries.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMatrixError, DimensionError, RankDeficientError

_TWO_POW_53 = 2.0 ** -53


# ---------------------------------------------------------------------------
# Vectors and matrices
# ---------------------------------------------------------------------------

def as_vector(values, name: str = "vector") -> np.ndarray:
    """Return ``values`` as a finite 1-d float64 array."""
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Return ``values`` as a finite, row-major 2-d float64 array."""
    a = np.ascontiguousarray(values, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def dot(u: np.ndarray, v: np.ndarray) -> float:
    if u.shape != v.shape:
        raise DimensionError(f"length mismatch: {u.shape} vs {v.shape}")
    return float(np.dot(u, v))


def norm2(u: np.ndarray) -> float:
    return math.sqrt(float(np.dot(u, u)))


def row_norms_sq(A: np.ndarray) -> np.ndarray:
    """Squared Euclidean norm of every row of ``A``."""
    return np.einsum("ij,ij->i", A, A)


def frobenius_sq(A: np.ndarray) -> float:
    """Sum of squared entries; raises if the matrix is identically zero."""
    total = float(np.sum(row_norms_sq(A)))
    if total == 0.0:
        raise DegenerateMatrixError("all-zero matrix: row distribution undefined")
    return total


# ---------------------------------------------------------------------------
# Random numbers
# ---------------------------------------------------------------------------

@dataclass
class RngState:
    """Reproducible 64-bit random stream keyed by ``(seed, stream)``.

    Raw words come from the Philox-4x64-10 counter-based generator with the
    128-bit key ``(seed, stream)``.  Everything downstream of the raw words is
    done here, so the sequence does not depend on numpy's distribution code:

    * uniforms are ``(word >> 11) * 2**-53`` in ``[0, 1)``;
    * normals use Box-Muller on consecutive uniform pairs ``(u1, u2)``,
      emitting ``r cos(2 pi u2)`` then ``r sin(2 pi u2)`` with
      ``r = sqrt(-2 log(1 - u1))``.  An odd request discards the last sine.

    A state must not be shared between concurrent tasks; derive independent
    streams with :meth:`spawn` instead.
    """

    seed: int
    stream: int = 0
    _bits: np.random.Philox = field(init=False, repr=False)

    def __post_init__(self):
        key = np.array([self.seed % 2**64, self.stream % 2**64], dtype=np.uint64)
        self._bits = np.random.Philox(key=key)

    def spawn(self, stream: int) -> "RngState":
        return RngState(self.seed, stream)

    def raw(self, size: int) -> np.ndarray:
        return self._bits.random_raw(size)

    def uniform(self, size: int) -> np.ndarray:
        return (self.raw(size) >> np.uint64(11)).astype(np.float64) * _TWO_POW_53

    def normal(self, size: int) -> np.ndarray:
        pairs = (size + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        out = np.empty((pairs, 2))
        out[:, 0] = r * np.cos(theta)
        out[:, 1] = r * np.sin(theta)
        return out.reshape(-1)[:size]


def gaussian_vector(rng: RngState, length: int, stddev: float = 1.0) -> np.ndarray:
    """I.i.d. zero-mean normal entries with standard deviation ``stddev``."""
    if length < 1:
        raise ValueError("length must be at least 1")
    return rng.normal(length) * stddev


def sphere_uniform(rng: RngState, length: int) -> np.ndarray:
    """Point drawn uniformly from the unit sphere in ``length`` dimensions."""
    while True:
        g = gaussian_vector(rng, length)
        nrm = norm2(g)
        if nrm > 0.0:
            return g / nrm


# ---------------------------------------------------------------------------
# Row sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RowDistribution:
    """Cumulative table of squared row norms.

    Row ``i`` is drawn with probability ``weights[i] / total``.  Zero rows get
    weight 0 and are never drawn.
    """

    weights: np.ndarray
    cumulative: np.ndarray
    total: float

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.total


def build_row_distribution(A: np.ndarray) -> RowDistribution:
    return distribution_from_weights(row_norms_sq(A))


def distribution_from_weights(weights) -> RowDistribution:
    w = np.array(weights, dtype=np.float64)
    if w.ndim != 1 or len(w) == 0:
        raise DegenerateMatrixError("need at least one row")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    cumulative = np.cumsum(w)
    total = float(cumulative[-1])
    if total <= 0.0:
        raise DegenerateMatrixError("all rows are zero: row distribution undefined")
    w.flags.writeable = False
    cumulative.flags.writeable = False
    return RowDistribution(w, cumulative, total)


def sample_rows(dist: RowDistribution, rng: RngState, size: int) -> np.ndarray:
    """Draw ``size`` i.i.d. row indices.

    A uniform word is mapped to a target ``t = (1 - u) * total`` in
    ``(0, total]`` and the returned index is the first ``i`` with
    ``cumulative[i] >= t``.  A target landing exactly on a cut point therefore
    goes to the lower index, and zero-weight rows are never returned.
    """
    t = (1.0 - rng.uniform(size)) * dist.total
    idx = np.searchsorted(dist.cumulative, t, side="left")
    return np.minimum(idx, dist.size - 1)


def sample_row(dist: RowDistribution, rng: RngState) -> int:
    return int(sample_rows(dist, rng, 1)[0])


def sample_rows_without_replacement(dist: RowDistribution, rng: RngState,
                                    size: int) -> np.ndarray:
    """Successive weighted sampling without replacement, in draw order.

    Uses exponential keys ``-log(u_i) / w_i``: sorting ascending yields the
    same law as drawing rows one at a time proportional to the remaining
    weights.  With equal weights every size-``size`` subset is equally likely.
    """
    support = int(np.count_nonzero(dist.weights))
    if size > support:
        raise ValueError(f"cannot draw {size} distinct rows from {support} nonzero rows")
    u = 1.0 - rng.uniform(dist.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        keys = np.where(dist.weights > 0, -np.log(u) / dist.weights, np.inf)
    if size < dist.size:
        part = np.argpartition(keys, size - 1)[:size]
    else:
        part = np.arange(dist.size)
    # stable sort on (key, index) keeps the order deterministic under ties
    return part[np.lexsort((part, keys[part]))]


# ---------------------------------------------------------------------------
# Singular values via cyclic Jacobi
# ---------------------------------------------------------------------------

def jacobi_eigenvalues(S: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of the symmetric matrix ``S`` by the cyclic Jacobi method.

    A rotation is skipped once ``|S_pq| <= tol * sqrt(|S_pp S_qq|)``; the
    iteration stops after a full sweep with no rotation.  Returns the
    eigenvalues in ascending order.
    """
    a = np.array(S, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DimensionError(f"expected a square matrix, got {a.shape}")
    if not np.allclose(a, a.T, rtol=1e-12, atol=0.0):
        raise ValueError("matrix is not symmetric")
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                app, aqq = a[p, p], a[q, q]
                if apq == 0.0 or abs(apq) <= tol * math.sqrt(abs(app * aqq)):
                    continue
                rotated = True
                theta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rp = a[p].copy()
                rq = a[q].copy()
                a[p] = c * rp - s * rq
                a[q] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = a[q, p] = 0.0
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
        if not rotated:
            break
    return np.sort(np.diag(a))


def gram_eigenvalues(A: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``A^T A`` (squared singular values), ascending."""
    return np.maximum(jacobi_eigenvalues(A.T @ A), 0.0)


def sigma_min(A: np.ndarray, rank_tol: float = 1e-10) -> float:
    """Smallest singular value of a tall, full-column-rank matrix.

    Squares the condition number by forming ``A^T A``; fine for the
    moderately conditioned desk-scale problems this package targets.
    """
    m, n = A.shape
    if m < n:
        raise DimensionError(f"need rows >= cols, got {m}x{n}")
    lam = gram_eigenvalues(A)
    if lam[-1] <= 0.0 or lam[0] <= rank_tol * lam[-1]:
        raise RankDeficientError(
            f"matrix is rank deficient (lambda_min={lam[0]:.3e}, lambda_max={lam[-1]:.3e})")
    return math.sqrt(lam[0])


def sigma_max(A: np.ndarray) -> float:
    return math.sqrt(gram_eigenvalues(A)[-1])


# ---------------------------------------------------------------------------
# Linear systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearSystem:
    """``A x = b`` with the per-row data every solver needs precomputed."""

    A: np.ndarray
    b: np.ndarray
    row_norms_sq: np.ndarray
    row_norms: np.ndarray
    distribution: RowDistribution

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    @functools.cached_property
    def score_table(self) -> np.ndarray:
        """``[a_i, b_i] / ||a_i||`` row by row; see :func:`score_table`."""
        return score_table(self.A, self.row_norms, self.b)


def score_table(rows: np.ndarray, norms: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``m x (k+1)`` table whose row ``i`` is ``[rows_i, b_i] / norms_i``.

    ``|table[i] @ [z, -1]|`` is then the score ``|b_i - <rows_i, z>| / norms_i``
    in a single gather and product.  Zero-norm rows are stored as zeros and
    score 0.
    """
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    table = np.empty((rows.shape[0], rows.shape[1] + 1))
    np.multiply(rows, inv[:, None], out=table[:, :-1])
    np.multiply(b, inv, out=table[:, -1])
    table.flags.writeable = False
    return table


def make_system(A, b) -> LinearSystem:
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    if len(b) != A.shape[0]:
        raise DimensionError(f"b has length {len(b)}, A has {A.shape[0]} rows")
    nsq = row_norms_sq(A)
    return LinearSystem(A, b, nsq, np.sqrt(nsq), distribution_from_weights(nsq))
