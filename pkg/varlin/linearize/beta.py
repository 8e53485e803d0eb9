"""Maximal-moment constant of block windows."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from varlin.config.tolerance import get_config
from varlin.errors import DomainError
from varlin.generators.model import ArrayModel
from varlin.generators.sampling import sample_paths
from varlin.linearize.blocks import BlockPartition
from varlin.linearize.constants import GrowthConstants
from varlin.mixing.profile import MixingProfile

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BetaEstimate:
    """
    Attributes:
        empirical: ``max_j ||max_l |S_{a_j - 1, l}| ||_{p0} / sqrt(Q)`` over block windows.
        standard_error: Delta-method standard error of ``empirical``.
        analytic: ``C_eps p0 (1 + j_n K_inf)``, or None when ``j_n`` does not exist.
        j_n: ``min{j : phi(j) < 1/2 - eps}``.
        worst_block: Block attaining the empirical maximum.
    """

    empirical: float
    standard_error: float
    analytic: float | None
    j_n: int | None
    worst_block: int


def first_mixing_lag(profile: MixingProfile, eps: float | None = None) -> int | None:
    """``j_n = min{j : phi(j) < 1/2 - eps}``, or None."""
    eps = get_config().calibration.beta_epsilon if eps is None else eps
    if profile.phi is None:
        return None
    hits = np.flatnonzero(np.asarray(profile.phi) < 0.5 - eps)
    return int(hits[0]) + 1 if hits.size else None


def analytic_beta(profile: MixingProfile, p0: float, k_inf: float) -> tuple[float | None, int | None]:
    j_n = first_mixing_lag(profile)
    if j_n is None:
        return None, None
    return get_config().calibration.c_epsilon * p0 * (1.0 + j_n * k_inf), j_n


def block_window_maxima(values: np.ndarray, partition: BlockPartition) -> np.ndarray:
    """``max_{0 < l <= |B_j|} |S_{a_j - 1, l}|`` per replicate and block, shape ``(R, k)``."""
    out = np.empty((values.shape[0], partition.k))
    for j, (a, b) in enumerate(partition.blocks):
        partial = np.cumsum(values[:, a - 1 : b], axis=1)
        out[:, j] = np.abs(partial).max(axis=1)
    return out


def estimate_beta(
    model: ArrayModel,
    partition: BlockPartition,
    constants: GrowthConstants,
    profile: MixingProfile,
    p0: float,
    replicates: int = 2000,
    seed: int = 0,
    k_inf: float | None = None,
    n_jobs: int = 1,
) -> BetaEstimate:
    """
    Monte Carlo ``beta_n`` over the partition's block windows plus the analytic bound.

    Args:
        model: Model to sample.
        partition: Blocks defining the windows ``(a_j - 1, |B_j|)``.
        constants: Supplies ``Q``.
        profile: Supplies ``phi`` for ``j_n``.
        p0: Moment order, ``p0 > 2``.
        replicates: Number of sampled rows.
        seed: Master seed.
        k_inf: ``K_inf``; sampled sup of ``|xi_j|`` when omitted.
    """
    if p0 <= 2:
        raise DomainError(f"Moment order p0 must exceed 2, got {p0}")
    batch = sample_paths(model, seed, replicates, n=partition.n, n_jobs=n_jobs)
    maxima = block_window_maxima(batch.values, partition)
    moments = np.mean(maxima**p0, axis=0)
    norms = moments ** (1.0 / p0)
    worst = int(np.argmax(norms))
    root_q = math.sqrt(constants.Q)
    se_moment = float(np.std(maxima[:, worst] ** p0, ddof=1)) / math.sqrt(replicates)
    se_norm = (1.0 / p0) * moments[worst] ** (1.0 / p0 - 1.0) * se_moment if moments[worst] > 0 else 0.0
    k_inf = float(np.abs(batch.values).max()) if k_inf is None else k_inf
    analytic, j_n = analytic_beta(profile, p0, k_inf)
    estimate = BetaEstimate(
        empirical=float(norms[worst]) / root_q,
        standard_error=se_norm / root_q,
        analytic=analytic,
        j_n=j_n,
        worst_block=worst + 1,
    )
    if analytic is None:
        logger.info("No lag with phi < 1/2 - eps for %s; analytic beta unavailable", model.model_id)
    logger.debug("Beta for %s: %s", model.model_id, estimate)
    return estimate


__all__ = [
    "BetaEstimate",
    "first_mixing_lag",
    "analytic_beta",
    "block_window_maxima",
    "estimate_beta",
]
