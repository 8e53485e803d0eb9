"""Growth constants of a row: separation lag, covariance sums and the block scale Q."""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from varlin.config.tolerance import get_config
from varlin.errors import DomainError, InfeasibleMixingError, MissingDataError
from varlin.generators.model import ArrayModel, ModelKind
from varlin.mixing.profile import MixingProfile

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GrowthConstants:
    """
    Row constants feeding the block construction.

    ``C = 2 K sum rho``, ``D = 1 + 2 sum rho`` and
    ``Q = 2 K^2 D r + 4 C K sqrt(D r)``.
    """

    n: int
    K: float
    r: int
    C: float
    D: float
    Q: float
    eps0: float
    sigma: float
    beta: float
    p0: float
    rho_sum: float
    qn_floor_ok: bool
    qn_little_o_ok: bool

    @property
    def A(self) -> float:
        """Core target variance ``A = 2 Q``."""
        return 2.0 * self.Q

    @property
    def sigma2(self) -> float:
        return self.sigma * self.sigma

    @property
    def valid(self) -> bool:
        return self.qn_floor_ok and self.qn_little_o_ok

    def as_dict(self) -> dict:
        return {**asdict(self), "A": self.A}


def find_separation(rho: np.ndarray, n: int) -> int:
    """
    Smallest ``r`` in ``1..n`` with ``sum_{m=1..n // r} rho(r m) <= 1/4``.

    Args:
        rho: Coefficients with lag ``j`` at position ``j - 1``, at least ``n`` long.
        n: Row size.

    Raises:
        InfeasibleMixingError: No ``r <= n`` qualifies.
    """
    rho = np.asarray(rho, dtype=float)
    if n < 1:
        raise DomainError("Row size must be at least 1")
    if rho.size < n:
        raise MissingDataError(f"rho covers {rho.size} lags, need {n}")
    if np.any(rho < 0) or np.any(rho > 1):
        raise DomainError("rho coefficients must lie in [0, 1]")
    for r in range(1, n + 1):
        if math.fsum(rho[r - 1 :: r][: n // r]) <= 0.25:
            return r
    raise InfeasibleMixingError(f"No separation lag r <= {n} makes the rho tail sum at most 1/4")


def growth_constants(
    profile: MixingProfile,
    K: float,
    sigma: float,
    beta: float = 1.0,
    p0: float = 4.0,
    eps0: float = 1e-3,
) -> GrowthConstants:
    """
    Evaluate ``K, r, C, D, Q`` and the validity flags for one row.

    Flags: ``Q >= eps0`` and ``Q <= little_o_ratio * sigma^2`` (the
    operational proxy for ``Q = o(sigma^2)``).

    Raises:
        MissingDataError: Profile without ``rho``.
        InfeasibleMixingError: From :func:`find_separation`.
    """
    if profile.rho is None:
        raise MissingDataError("Growth constants need a rho profile")
    n = profile.n
    rho = np.asarray(profile.rho, dtype=float)
    r = find_separation(rho, n)
    total = math.fsum(rho[:n])
    C = 2.0 * K * total
    D = 1.0 + 2.0 * total
    Q = 2.0 * K * K * D * r + 4.0 * C * K * math.sqrt(D * r)
    ratio = get_config().calibration.little_o_ratio
    constants = GrowthConstants(
        n=n,
        K=float(K),
        r=r,
        C=C,
        D=D,
        Q=Q,
        eps0=eps0,
        sigma=float(sigma),
        beta=float(beta),
        p0=float(p0),
        rho_sum=total,
        qn_floor_ok=Q >= eps0,
        qn_little_o_ok=Q <= ratio * sigma * sigma,
    )
    logger.debug("Growth constants for %s: %s", profile.model_id, constants.as_dict())
    if not constants.qn_little_o_ok:
        logger.info("Q=%.4g exceeds %.3g * sigma^2=%.4g for %s", Q, ratio, sigma * sigma, profile.model_id)
    return constants


def constants_for_model(model: ArrayModel, profile: MixingProfile, oracle, beta: float = 1.0, p0: float = 4.0, eps0: float = 1e-3) -> GrowthConstants:
    """Growth constants with ``K = max_j ||xi_j||_2`` and ``sigma^2 = Var(S_n)`` taken from the oracle."""
    K = oracle.marginal_norm(2)
    sigma = math.sqrt(oracle.variance(1, model.n))
    return growth_constants(profile, K, sigma, beta=beta, p0=p0, eps0=eps0)


@dataclass(frozen=True)
class WindowGrowth:
    ratio: float
    limit: float
    passed: bool


def window_growth_check(model: ArrayModel, constants: GrowthConstants) -> WindowGrowth:
    """``Q <= c K^2 max(m, 1)^2`` for a local-window array, ``c`` frozen in configuration."""
    if model.kind != ModelKind.LOCAL_WINDOW:
        raise DomainError("Window growth check applies to local-window models")
    half_width = max(model.window.half_width, 1)
    ratio = constants.Q / (constants.K**2 * half_width**2)
    limit = get_config().calibration.window_constant
    return WindowGrowth(ratio=ratio, limit=limit, passed=ratio <= limit)


__all__ = [
    "GrowthConstants",
    "find_separation",
    "growth_constants",
    "constants_for_model",
    "WindowGrowth",
    "window_growth_check",
]
