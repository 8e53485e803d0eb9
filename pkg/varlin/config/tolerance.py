"""Numeric tolerances, frozen calibration constants and resource budgets.

Users can customize these values by calling :func:`update_config` or by
setting environment variables before the first import.
"""

import os
from dataclasses import dataclass, fields, replace

from varlin.errors import UsageError


@dataclass
class ToleranceConfig:
    """Absolute tolerances used by validations and certifications."""

    row_sum: float = 1e-12  # Transition rows must sum to 1
    centering: float = 1e-12  # Exact mean of every observable
    mass: float = 1e-12  # Total mass of a lattice pmf
    variance: float = 1e-9  # Cross-oracle variance agreement
    partition: float = 1e-9  # Block sandwich inequalities
    martingale: float = 1e-10  # Martingale property and telescoping
    mixing: float = 1e-12  # Coefficient inequalities
    cumulant_cancellation: float = 1e-10  # Relative floor for |Gamma_k|
    lattice_snap: float = 1e-9  # Distance tolerated when snapping to the lattice

    def __post_init__(self):
        """Load values from environment variables if present."""
        for f in fields(self):
            env = os.getenv(f"VARLIN_TOL_{f.name.upper()}")
            if env is not None:
                setattr(self, f.name, float(env))


@dataclass
class CalibrationConfig:
    """Constants the theory leaves unspecified, calibrated once and frozen."""

    little_o_ratio: float = 0.1  # Operational gate for Q_n = o(sigma_n^2)
    c_epsilon: float = 1.0  # Constant of the maximal moment bound
    beta_epsilon: float = 1 / 6  # epsilon in j_n = min{j : phi(j) < 1/2 - epsilon}
    time_change_gap_constant: float = 9.0  # Constant of the time-change gap bound
    rate_constant: float = 1.0  # C_{p0} of the functional CLT bounds
    memory_constant: float = 1.0  # C of the memory coefficient bound
    cumulant_ratio: float = 10.0  # max/min ratio accepted as "bounded"
    asip_epsilon: float = 0.1  # epsilon in V_n^(1/p0 + epsilon)
    guard_sigmas: float = 3.0  # Standard errors added to Monte Carlo targets
    window_constant: float = 128.0  # Ceiling of Q_n / (K_n^2 m_n^2) for window arrays
    block_control_ratio: float = 2.0  # Allowed max_j c_j / c_1 of suffix block norms

    def __post_init__(self):
        """Load values from environment variables if present."""
        for f in fields(self):
            env = os.getenv(f"VARLIN_CAL_{f.name.upper()}")
            if env is not None:
                setattr(self, f.name, float(env))


@dataclass
class BudgetConfig:
    """Resource ceilings; exceeding one raises ResourceBudgetError."""

    lattice_points: int = 2**24
    window_states: int = 4096
    varpi_vertices: int = 2**20
    varpi_states: int = 256
    orbit_length: int = 2**20
    dobrushin_horizon: int = 4
    qv_grid: int = 1024
    max_moment_order: int = 16

    def __post_init__(self):
        """Load values from environment variables if present."""
        for f in fields(self):
            env = os.getenv(f"VARLIN_BUDGET_{f.name.upper()}")
            if env is not None:
                setattr(self, f.name, int(env))


@dataclass
class VarlinConfig:
    """Master configuration combining all settings."""

    tolerance: ToleranceConfig
    calibration: CalibrationConfig
    budget: BudgetConfig

    def __init__(self):
        """Initialize all configuration groups."""
        self.tolerance = ToleranceConfig()
        self.calibration = CalibrationConfig()
        self.budget = BudgetConfig()

    def as_dict(self) -> dict[str, dict[str, float]]:
        """Flatten into a manifest-friendly mapping."""
        return {
            group: {f.name: getattr(getattr(self, group), f.name) for f in fields(getattr(self, group))}
            for group in ("tolerance", "calibration", "budget")
        }


# Global configuration instance
VARLIN_CONFIG = VarlinConfig()

TOLERANCE_PROFILES = ("default", "strict")


def get_config() -> VarlinConfig:
    """
    Get the global configuration.

    Returns:
        The global VarlinConfig instance.
    """
    return VARLIN_CONFIG


def update_config(
    tolerance: ToleranceConfig | None = None,
    calibration: CalibrationConfig | None = None,
    budget: BudgetConfig | None = None,
) -> None:
    """
    Update the global configuration.

    Args:
        tolerance: New tolerance configuration.
        calibration: New calibration constants.
        budget: New resource budgets.

    Example:
        >>> from varlin.config.tolerance import update_config, BudgetConfig
        >>> update_config(budget=BudgetConfig(window_states=256))
    """
    global VARLIN_CONFIG
    if tolerance is not None:
        VARLIN_CONFIG.tolerance = tolerance
    if calibration is not None:
        VARLIN_CONFIG.calibration = calibration
    if budget is not None:
        VARLIN_CONFIG.budget = budget


def apply_tolerance_profile(name: str) -> ToleranceConfig:
    """
    Switch the global tolerances to a named profile.

    Args:
        name: 'default' or 'strict' (every tolerance divided by 100).

    Returns:
        The tolerance configuration now in effect.
    """
    if name not in TOLERANCE_PROFILES:
        raise UsageError(f"Unknown tolerance profile: {name}")
    base = ToleranceConfig()
    if name == "strict":
        base = replace(
            base,
            **{f.name: max(getattr(base, f.name) / 100, 1e-14) for f in fields(base)},
        )
    update_config(tolerance=base)
    return base


__all__ = [
    "ToleranceConfig",
    "CalibrationConfig",
    "BudgetConfig",
    "VarlinConfig",
    "VARLIN_CONFIG",
    "TOLERANCE_PROFILES",
    "get_config",
    "update_config",
    "apply_tolerance_profile",
]
