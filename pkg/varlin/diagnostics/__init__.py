"""Quantitative checks of the non-functional limit theorems."""

from varlin.diagnostics.asip import AsipResidual, AsipRow, CovarianceDecay, asip_residual, block_covariance_decay
from varlin.diagnostics.deviations import MdpCurve, MdpPoint, mdp_curve
from varlin.diagnostics.moments import CumulantGrowth, MomentGap, cumulant_growth, moment_gap
from varlin.diagnostics.normal import FddCheck, KolmogorovDistance, fdd_check, kolmogorov_to_normal
from varlin.diagnostics.rates import (
    PhiEnvelope,
    RateFit,
    RateSeries,
    berry_esseen_normalizer,
    mdp_normalizer,
    mdp_speed_ratio,
    phi_envelope,
    rate_fit,
    write_fits_csv,
)

__all__ = [
    "AsipResidual",
    "AsipRow",
    "CovarianceDecay",
    "asip_residual",
    "block_covariance_decay",
    "MdpCurve",
    "MdpPoint",
    "mdp_curve",
    "CumulantGrowth",
    "MomentGap",
    "cumulant_growth",
    "moment_gap",
    "FddCheck",
    "KolmogorovDistance",
    "fdd_check",
    "kolmogorov_to_normal",
    "PhiEnvelope",
    "RateFit",
    "RateSeries",
    "berry_esseen_normalizer",
    "mdp_normalizer",
    "mdp_speed_ratio",
    "phi_envelope",
    "rate_fit",
    "write_fits_csv",
]
