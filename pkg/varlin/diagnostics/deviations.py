"""Moderate-deviation curves from exact log-tails."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from varlin.errors import DomainError
from varlin.oracle.lattice import LatticePmf, TailSide, tail_probability

logger = logging.getLogger(__name__)

LOG_TAIL_FLOOR = math.log(1e-280)


@dataclass(frozen=True)
class MdpPoint:
    x: float
    rate: float
    deviation: float
    dropped: bool = False


@dataclass(frozen=True)
class MdpCurve:
    """Points ``(x, a^{-2} ln P(S >= x sigma a))`` and their distance to ``-x^2 / 2``."""

    a_n: float
    sigma: float
    points: list[MdpPoint]

    @property
    def sup_deviation(self) -> float:
        kept = [p.deviation for p in self.points if not p.dropped]
        return max(kept) if kept else math.nan

    @property
    def dropped(self) -> list[float]:
        return [p.x for p in self.points if p.dropped]


def mdp_curve(pmf: LatticePmf, sigma: float, a_n: float, x_grid) -> MdpCurve:
    """
    Raises:
        DomainError: ``a_n < 1`` or ``sigma <= 0``.
    """
    if a_n < 1:
        raise DomainError(f"Speed a_n must be at least 1, got {a_n}")
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    top = float(pmf.values[-1])
    points = []
    for x in np.asarray(x_grid, dtype=float):
        threshold = x * sigma * a_n
        tail = tail_probability(pmf, threshold, TailSide.GE) if threshold <= top else None
        if tail is None or tail.log_probability < LOG_TAIL_FLOOR:
            logger.debug("Dropped MDP point x=%.3g (sigma=%.4g): tail out of range", x, sigma)
            points.append(MdpPoint(float(x), math.nan, math.nan, dropped=True))
            continue
        rate = tail.log_probability / a_n**2
        points.append(MdpPoint(float(x), rate, abs(rate + x * x / 2.0)))
    return MdpCurve(a_n=a_n, sigma=sigma, points=points)


__all__ = ["MdpPoint", "MdpCurve", "mdp_curve"]
