"""Sparsity-constrained ADMM toolkit (native core)."""

from ._elsa import (
    ConfigError,
    GuardError,
    ShapeError,
    best_subset_ls,
    check,
    check_corollary1,
    check_theorem2,
    min_feasible_lambda,
    normalize_config,
    project_nm,
    project_topk,
    project_weighted_topk,
    quant_roundtrip,
    quant_roundtrip_error,
    quantize,
    run_experiment,
    solve_least_squares,
    solve_quadratic,
    sparse_regression,
    theorem2_lhs,
)

__all__ = [
    "ConfigError",
    "GuardError",
    "ShapeError",
    "best_subset_ls",
    "check",
    "check_corollary1",
    "check_theorem2",
    "min_feasible_lambda",
    "normalize_config",
    "project_nm",
    "project_topk",
    "project_weighted_topk",
    "quant_roundtrip",
    "quant_roundtrip_error",
    "quantize",
    "run_experiment",
    "solve_least_squares",
    "solve_quadratic",
    "sparse_regression",
    "theorem2_lhs",
]
