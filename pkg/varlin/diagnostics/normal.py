"""Distances between partial-sum laws and the normal law."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import kstest, norm

from varlin.errors import DomainError
from varlin.martingale.paths import PathPair
from varlin.oracle.lattice import LatticePmf

logger = logging.getLogger(__name__)

DKW_LEVEL = 0.05


@dataclass(frozen=True)
class KolmogorovDistance:
    distance: float
    argsup: float
    degenerate: bool


def kolmogorov_to_normal(pmf: LatticePmf, sigma: float) -> KolmogorovDistance:
    """
    Exact ``sup_t |P(S / sigma <= t) - Phi(t)|``.

    The supremum is attained at a one-sided limit of some jump, so both
    ``F(x-)`` and ``F(x)`` are compared with ``Phi(x)`` at every atom. Upper
    tails are compared through survival functions to keep their precision.
    """
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    keep = pmf.weights > 0
    w = pmf.weights[keep]
    x = pmf.values[keep] / sigma
    cdf_incl = np.cumsum(w)
    cdf_excl = cdf_incl - w
    surv_incl = np.cumsum(w[::-1])[::-1]
    surv_excl = surv_incl - w
    lower = x <= 0
    phi = norm.cdf(x)
    sf = norm.sf(x)
    left = np.where(lower, np.abs(cdf_excl - phi), np.abs(surv_incl - sf))
    right = np.where(lower, np.abs(cdf_incl - phi), np.abs(surv_excl - sf))
    gaps = np.maximum(left, right)
    i = int(np.argmax(gaps))
    return KolmogorovDistance(float(gaps[i]), float(x[i]), bool(w.size == 1))


@dataclass(frozen=True)
class FddCheck:
    """
    Attributes:
        t: Times checked (positive grid points).
        distances: Empirical ``d_K(W(t), N(0, t))``.
        dkw_radius: 95% Dvoretzky-Kiefer-Wolfowitz band of the empirical CDF.
        covariance_error: ``max_{s,t} |Cov(W(s), W(t)) - min(s, t)|``.
    """

    t: np.ndarray
    distances: np.ndarray
    dkw_radius: float
    covariance_error: float


def fdd_check(pairs: PathPair, t_grid: np.ndarray | None = None) -> FddCheck:
    """Marginal and covariance check of ``W`` against Brownian motion on a few times."""
    if t_grid is None:
        t_grid = np.array([0.25, 0.5, 0.75, 1.0])
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any((t_grid <= 0) | (t_grid > 1)):
        raise DomainError("Finite-dimensional times must lie in (0, 1]")
    idx = np.searchsorted(pairs.t, t_grid - 1e-12)
    idx = np.minimum(idx, pairs.t.size - 1)
    times = pairs.t[idx]
    cols = pairs.W[:, idx]
    distances = np.array([kstest(cols[:, i], norm(scale=math.sqrt(t)).cdf).statistic for i, t in enumerate(times)])
    radius = math.sqrt(math.log(2.0 / DKW_LEVEL) / (2.0 * pairs.replicates))
    cov = np.cov(cols, rowvar=False).reshape(times.size, times.size)
    target = np.minimum.outer(times, times)
    err = float(np.abs(cov - target).max())
    logger.debug("Finite-dimensional check of %s: d_K=%s, cov error %.3g", pairs.model_id, distances, err)
    return FddCheck(t=times, distances=distances, dkw_radius=radius, covariance_error=err)


__all__ = ["KolmogorovDistance", "kolmogorov_to_normal", "FddCheck", "fdd_check"]
