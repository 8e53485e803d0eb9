"""Martingale-coboundary decomposition, time-changed paths and rate-bound calculators."""

from varlin.martingale.bounds import (
    MaximalCheck,
    RateBounds,
    SequentialConstants,
    block_b_terms,
    block_sums,
    grouping_rate,
    martingale_b_terms,
    maximal_constant,
    maximal_inequality_check,
    memory_coefficient,
    memory_rate,
    rate_bounds,
    sequential_constants,
    write_bounds_csv,
)
from varlin.martingale.coboundary import (
    CoboundaryDecomp,
    ResidualBoundCheck,
    future_conditional_sum,
    future_conditional_sums,
    martingale_differences,
    residual_bound_check,
    residual_norm,
    variance_transfer_gap,
)
from varlin.martingale.paths import (
    CoupledBounds,
    LyapunovBound,
    PathPair,
    QuadraticVariation,
    TimeChange,
    block_maxima_bound,
    build_path_pair,
    coupled_pair_bounds,
    ky_fan_distance,
    lp_norm,
    lyapunov_bound,
    lyapunov_sum,
    orthogonality_report,
    prokhorov_bound,
    qv_gap_bound,
    quadratic_variation,
    time_change,
    time_grid,
)

__all__ = [
    "MaximalCheck",
    "RateBounds",
    "SequentialConstants",
    "block_b_terms",
    "block_sums",
    "grouping_rate",
    "martingale_b_terms",
    "maximal_constant",
    "maximal_inequality_check",
    "memory_coefficient",
    "memory_rate",
    "rate_bounds",
    "sequential_constants",
    "write_bounds_csv",
    "CoboundaryDecomp",
    "ResidualBoundCheck",
    "future_conditional_sum",
    "future_conditional_sums",
    "martingale_differences",
    "residual_bound_check",
    "residual_norm",
    "variance_transfer_gap",
    "CoupledBounds",
    "LyapunovBound",
    "PathPair",
    "QuadraticVariation",
    "TimeChange",
    "block_maxima_bound",
    "build_path_pair",
    "coupled_pair_bounds",
    "ky_fan_distance",
    "lp_norm",
    "lyapunov_bound",
    "lyapunov_sum",
    "orthogonality_report",
    "prokhorov_bound",
    "qv_gap_bound",
    "quadratic_variation",
    "time_change",
    "time_grid",
]
