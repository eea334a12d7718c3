"""
Closed-form convergence bounds for randomized Kaczmarz and its greedy variants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ParameterError
from .linalg import as_vector, frobenius_sq, row_norms_sq, sigma_min
from .sketch import DEFAULT_C, jl_dimension


@dataclass(frozen=True)
class BoundReport:
    R: float
    frobenius_sq: float
    sigma_min: float
    curve: list | None = None
    jl_dimension: int | None = None


def compute_R(A: np.ndarray, rank_tol: float = 1e-10) -> BoundReport:
    """Scaled condition number ``R = ||A||_F^2 / sigma_min(A)^2``."""
    fro = frobenius_sq(A)
    smin = sigma_min(A, rank_tol)
    return BoundReport(R=fro / smin ** 2, frobenius_sq=fro, sigma_min=smin)


def bound_report(A: np.ndarray, initial_error_sq: float = 1.0, k_max: int = 0,
                 delta: float | None = None, set_size: int | None = None,
                 constant_c: float = DEFAULT_C) -> BoundReport:
    base = compute_R(A)
    curve = rk_bound_curve(base.R, initial_error_sq, k_max) if k_max else None
    d = jl_dimension(delta, set_size, constant_c) if delta is not None else None
    return BoundReport(base.R, base.frobenius_sq, base.sigma_min, curve, d)


def rk_bound_curve(R: float, initial_error_sq: float, k_max: int) -> list:
    """``[(k, (1 - 1/R)^k * initial_error_sq) for k = 0..k_max]``."""
    if not R > 1.0:
        raise ParameterError(f"R must exceed 1, got {R}")
    rate = 1.0 - 1.0 / R
    return [(k, rate ** k * initial_error_sq) for k in range(k_max + 1)]


def noisy_rk_bound(R: float, initial_norm: float, k: int, gamma: float) -> float:
    """``(1 - 1/R)^(k/2) * initial_norm + sqrt(R) * gamma``."""
    if not R > 1.0:
        raise ParameterError(f"R must exceed 1, got {R}")
    if gamma < 0:
        raise ParameterError("gamma must be nonnegative")
    return (1.0 - 1.0 / R) ** (k / 2.0) * initial_norm + math.sqrt(R) * gamma


def gamma_of_noise(A: np.ndarray, w) -> float:
    """``max_i |w_i| / ||a_i||``; zero noise on a zero row contributes nothing."""
    w = as_vector(w, "w")
    if len(w) != A.shape[0]:
        raise ParameterError(f"noise has length {len(w)}, A has {A.shape[0]} rows")
    norms = np.sqrt(row_norms_sq(A))
    bad = (norms == 0) & (w != 0)
    if np.any(bad):
        raise ParameterError(
            f"gamma undefined: row {int(np.argmax(bad))} is zero but carries noise")
    live = norms > 0
    if not np.any(live):
        return 0.0
    return float(np.max(np.abs(w[live]) / norms[live]))


# ---------------------------------------------------------------------------
# Greedy-selection improvement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PVector:
    """``p[j-1]``: probability that row ``j`` is the best-ranked row in a
    uniformly random size-``n`` subset of ``m`` rows."""

    probabilities: tuple
    m: int
    n: int

    def as_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.probabilities])


def p_vector(m: int, n: int, exact: bool = False) -> PVector:
    """``p_j = C(m-j, n-1) / C(m, n)`` for ``j <= m-n+1`` and 0 beyond.

    Built from ``p_1 = n/m`` by the ratio ``p_{j+1}/p_j = (m-j-n+1)/(m-j)``,
    so no binomial coefficient is ever formed.  ``exact=True`` carries the
    recurrence in ``Fraction`` arithmetic.
    """
    if not 1 <= n <= m:
        raise ParameterError(f"need 1 <= n <= m, got m={m}, n={n}")
    one = Fraction(1) if exact else 1.0
    p = [one * n / m]
    for j in range(1, m):
        if j > m - n:
            p.append(one * 0)
        else:
            p.append(p[-1] * (m - j - n + 1) / (m - j))
    return PVector(tuple(p), m, n)


def squared_step_lengths(A: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``(b_i - <a_i, x>)^2 / ||a_i||^2`` for every row, sorted nonincreasing.

    This is ``||x_{k+1} - x_k||^2`` were row ``i`` chosen; for unit rows and
    ``b = 0`` it is ``<a_i, x>^2``.
    """
    g = (b - A @ x) ** 2 / row_norms_sq(A)
    return np.sort(g)[::-1]


def _check_sorted(gammas: np.ndarray, p: PVector) -> np.ndarray:
    g = as_vector(gammas, "gammas")
    if len(g) != p.m:
        raise ParameterError(f"{len(g)} scores for a p-vector of length {p.m}")
    if np.any(np.diff(g) > 0):
        raise ParameterError("scores must be sorted nonincreasing")
    return g


def beta_improvement(gammas_sorted_desc, p: PVector) -> float:
    """``sum_j (p_j - 1/m) gamma_j``; nonnegative for sorted input."""
    g = _check_sorted(gammas_sorted_desc, p)
    return float(np.dot(p.as_array() - 1.0 / p.m, g))


def theorem1_bound(gammas_sorted_desc, p: PVector, delta: float,
                   rk_expected_error_sq: float) -> float:
    """Upper bound on ``E||x_{k+1} - x||^2`` for one greedy step.

    ``min(E_rk - beta + 2 delta, E_rk)`` where ``E_rk`` is the standard
    method's expected squared error after the same step.  ``delta = 0``
    gives the exact-geometry form.
    """
    beta = beta_improvement(gammas_sorted_desc, p)
    return min(rk_expected_error_sq - beta + 2.0 * delta, rk_expected_error_sq)


def rk_expected_error_sq(gammas_sorted_desc, current_error_sq: float) -> float:
    """One uniform-row step on equal-norm rows: ``||x_k - x||^2 - mean(gamma)``."""
    return current_error_sq - float(np.mean(gammas_sorted_desc))
