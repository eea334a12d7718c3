"""Randomized Kaczmarz solvers with Johnson-Lindenstrauss accelerated row selection."""
from .analysis import (
    BoundReport,
    PVector,
    beta_improvement,
    compute_R,
    gamma_of_noise,
    noisy_rk_bound,
    p_vector,
    rk_bound_curve,
    theorem1_bound,
)
from .linalg import LinearSystem, RngState, make_system, sigma_min, sphere_uniform
from .sketch import GaussianSketch, SketchedSystem, build_sketch, jl_dimension, precompute_rows
from .solvers import SolverConfig, SolveTrace, prepare_system, solve

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "PVector", "beta_improvement", "compute_R", "gamma_of_noise",
    "noisy_rk_bound", "p_vector", "rk_bound_curve", "theorem1_bound",
    "LinearSystem", "RngState", "make_system", "sigma_min", "sphere_uniform",
    "GaussianSketch", "SketchedSystem", "build_sketch", "jl_dimension", "precompute_rows",
    "SolverConfig", "SolveTrace", "prepare_system", "solve",
]
