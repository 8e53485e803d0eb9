"""Moments and cumulants of lattice laws."""

import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from varlin.config.tolerance import get_config
from varlin.errors import DomainError, UnsupportedOrderError
from varlin.oracle.lattice import LatticePmf


@dataclass(frozen=True)
class MomentSummary:
    """Exact mean, centered moments ``mu_2..mu_p`` and cumulants ``Gamma_1..Gamma_p``."""

    mean: float
    moments: dict[int, float] = field(default_factory=dict)
    cumulants: dict[int, float] = field(default_factory=dict)

    @property
    def variance(self) -> float:
        return self.moments[2]

    def is_negligible(self, k: int) -> bool:
        """True when ``|Gamma_k|`` is below the cancellation floor ``tol * mu_2^(k/2)``."""
        floor = get_config().tolerance.cumulant_cancellation * self.variance ** (k / 2)
        return abs(self.cumulants[k]) < floor


def _check_order(order: int) -> None:
    if order < 2:
        raise DomainError(f"Moment order must be at least 2, got {order}")
    limit = get_config().budget.max_moment_order
    if order > limit:
        raise UnsupportedOrderError(f"Moment order {order} exceeds the supported maximum {limit}")


def moments_and_cumulants(pmf: LatticePmf, max_order: int) -> MomentSummary:
    """
    Exact centered moments and cumulants up to ``max_order``.

    Moments are summed with ``math.fsum`` over centered lattice values;
    cumulants follow from the recursion
    ``k_n = m_n - sum_{k=1}^{n-1} C(n-1, k-1) k_k m_{n-k}``
    applied to central moments (so ``k_1 = 0``), after which ``Gamma_1`` is
    set to the mean.

    Raises:
        DomainError: ``max_order < 2``.
        UnsupportedOrderError: ``max_order`` above the configured maximum.
    """
    _check_order(max_order)
    w = pmf.weights
    mean = pmf.mean()
    y = pmf.values - mean
    central = {0: 1.0, 1: 0.0}
    power = np.ones_like(y)
    for k in range(1, max_order + 1):
        power = power * y
        if k >= 2:
            central[k] = math.fsum(w * power)

    kappa = {1: 0.0}
    for order in range(2, max_order + 1):
        acc = central[order]
        for k in range(1, order):
            acc -= comb(order - 1, k - 1) * kappa[k] * central[order - k]
        kappa[order] = acc
    kappa[1] = mean
    return MomentSummary(
        mean=mean,
        moments={k: central[k] for k in range(2, max_order + 1)},
        cumulants=kappa,
    )


def raw_moment(pmf: LatticePmf, order: int) -> float:
    """Exact ``E[S^order]``."""
    _check_order(order)
    return math.fsum(pmf.weights * pmf.values**order)


def standardized_cumulant(summary: MomentSummary, k: int) -> float:
    """``Gamma_k(S / sigma)``."""
    return summary.cumulants[k] / summary.variance ** (k / 2)


__all__ = [
    "MomentSummary",
    "moments_and_cumulants",
    "raw_moment",
    "standardized_cumulant",
]
