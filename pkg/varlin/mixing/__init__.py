"""Mixing-coefficient profiles and dependence-coefficient oracles."""

from varlin.mixing.profile import (
    MixingProfile,
    Provenance,
    contraction_coefficient,
    declared_expanding_profile,
    declared_window_profile,
    derived_from_phi,
    dobrushin_phi_profile,
    exact_chain_profile,
    is_homogeneous_stationary,
    profile_for_model,
    rho_sum,
)
from varlin.mixing.varpi import (
    InterpolatedBound,
    Violation,
    brute_force_varpi,
    consistency_check,
    definitional_alpha_phi,
    interpolate_bound,
    varpi_profile,
    varpi_sum,
)

__all__ = [
    "MixingProfile",
    "Provenance",
    "contraction_coefficient",
    "declared_expanding_profile",
    "declared_window_profile",
    "derived_from_phi",
    "dobrushin_phi_profile",
    "exact_chain_profile",
    "is_homogeneous_stationary",
    "profile_for_model",
    "rho_sum",
    "InterpolatedBound",
    "Violation",
    "brute_force_varpi",
    "consistency_check",
    "definitional_alpha_phi",
    "interpolate_bound",
    "varpi_profile",
    "varpi_sum",
]
