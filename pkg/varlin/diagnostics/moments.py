"""Cumulant growth and moment gaps of exact partial-sum laws."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import factorial2

from varlin.config.tolerance import get_config
from varlin.errors import DomainError
from varlin.oracle.lattice import LatticePmf
from varlin.oracle.moments import moments_and_cumulants, raw_moment

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CumulantGrowth:
    """
    Attributes:
        k: Cumulant order.
        sigma: ``sigma_n`` per row.
        normalized: ``|Gamma_k(S_n / sigma_n)| sigma_n^{k-2}`` per row.
        negligible: Rows whose cumulant sits below the cancellation floor.
        ratio: max/min of the non-negligible normalized values.
        decreasing: Non-negligible values are non-increasing.
        bounded: ``ratio <= cumulant_ratio`` or ``decreasing``.
        bound: ``(C R)^k (k!)^{2 + eta} sigma^{-(k-2)}`` per row (``C = 1``) when ``R`` is given.
    """

    k: int
    sigma: np.ndarray
    normalized: np.ndarray
    negligible: np.ndarray
    ratio: float
    decreasing: bool
    bounded: bool
    bound: np.ndarray | None


def cumulant_growth(
    pmfs: list[LatticePmf],
    sigmas: list[float],
    k: int,
    R_n: float | list[float] | None = None,
    eta: float = 1.0,
) -> CumulantGrowth:
    """
    Track ``Gamma_k(S_n / sigma_n) sigma_n^{k-2}`` along a series of exact laws.

    Raises:
        DomainError: ``k`` outside ``3..8`` or mismatched inputs.
    """
    if not 3 <= k <= 8:
        raise DomainError(f"Cumulant order must lie in 3..8, got {k}")
    if len(pmfs) != len(sigmas):
        raise DomainError("One sigma per pmf is required")
    sigma = np.asarray(sigmas, dtype=float)
    normalized = np.empty(sigma.size)
    negligible = np.zeros(sigma.size, dtype=bool)
    for i, (pmf, s) in enumerate(zip(pmfs, sigma)):
        summary = moments_and_cumulants(pmf, k)
        negligible[i] = summary.is_negligible(k)
        normalized[i] = abs(summary.cumulants[k]) / s**k * s ** (k - 2)
    kept = normalized[~negligible]
    if kept.size:
        ratio = float(kept.max() / kept.min()) if kept.min() > 0 else math.inf
        decreasing = bool(np.all(np.diff(kept) <= 0))
    else:
        ratio, decreasing = 1.0, True
    bounded = ratio <= get_config().calibration.cumulant_ratio or decreasing
    bound = None
    if R_n is not None:
        R = np.broadcast_to(np.asarray(R_n, dtype=float), sigma.shape)
        bound = R**k * math.factorial(k) ** (2.0 + eta) * sigma ** (-(k - 2.0))
    logger.debug("Cumulant growth k=%d: normalized=%s, negligible=%s", k, normalized, negligible)
    return CumulantGrowth(k, sigma, normalized, negligible, ratio, decreasing, bounded, bound)


@dataclass(frozen=True)
class MomentGap:
    """
    Attributes:
        p: Even moment order.
        gap: ``|E[S^p] - sigma^p E[Z^p]|``.
        normalized: ``gap / sigma^{p-1}``.
        gaussian_moment: ``E[Z^p] = (p - 1)!!``.
        negligible: The gap sits below the cancellation floor.
        rosenthal_rhs: ``R (p!)^{2 + 1/eta} sum_u R^u sigma^{2u} p^u / (u!)^2`` when ``R`` is given.
    """

    p: int
    gap: float
    normalized: float
    gaussian_moment: float
    negligible: bool
    rosenthal_rhs: float | None


def moment_gap(pmf: LatticePmf, sigma: float, p: int, R_n: float | None = None, eta: float = 1.0) -> MomentGap:
    """
    Raises:
        DomainError: ``p`` odd or outside ``4..12``.
    """
    if p % 2 or not 4 <= p <= 12:
        raise DomainError(f"Moment order must be even in 4..12, got {p}")
    gaussian = float(factorial2(p - 1, exact=True))
    target = sigma**p * gaussian
    raw = raw_moment(pmf, p)
    gap = abs(raw - target)
    floor = get_config().tolerance.cumulant_cancellation * target
    rhs = None
    if R_n is not None:
        terms = [R_n**u * sigma ** (2 * u) * p**u / math.factorial(u) ** 2 for u in range(1, (p - 1) // 2 + 1)]
        rhs = R_n * math.factorial(p) ** (2.0 + 1.0 / eta) * math.fsum(terms)
    return MomentGap(
        p=p,
        gap=gap,
        normalized=gap / sigma ** (p - 1),
        gaussian_moment=gaussian,
        negligible=gap < floor,
        rosenthal_rhs=rhs,
    )


__all__ = ["CumulantGrowth", "cumulant_growth", "MomentGap", "moment_gap"]
