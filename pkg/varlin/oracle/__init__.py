"""Exact distributions, variances and moments of partial sums."""

from varlin.oracle.lattice import LatticePmf, TailProbability, TailSide, exact_sum_pmf, tail_probability
from varlin.oracle.moments import MomentSummary, moments_and_cumulants, raw_moment, standardized_cumulant
from varlin.oracle.variance import (
    ExactVarianceOracle,
    MonteCarloVarianceOracle,
    VarianceProfile,
    covariance,
    cross_covariance,
    marginal_norm,
    oracle_for_model,
    sup_norm,
    variance_of_range,
    variance_profile,
)

__all__ = [
    "LatticePmf",
    "TailProbability",
    "TailSide",
    "exact_sum_pmf",
    "tail_probability",
    "MomentSummary",
    "moments_and_cumulants",
    "raw_moment",
    "standardized_cumulant",
    "ExactVarianceOracle",
    "MonteCarloVarianceOracle",
    "VarianceProfile",
    "covariance",
    "cross_covariance",
    "marginal_norm",
    "oracle_for_model",
    "sup_norm",
    "variance_of_range",
    "variance_profile",
]
