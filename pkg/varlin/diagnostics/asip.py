"""Constructive ingredients of the almost sure invariance principle for sequences."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from varlin.config.tolerance import get_config
from varlin.errors import DomainError
from varlin.generators.model import ArrayModel
from varlin.generators.sampling import sample_paths
from varlin.linearize.sequence import SequencePartition, sequence_partition
from varlin.oracle.variance import ExactVarianceOracle

logger = logging.getLogger(__name__)

RESIDUAL_QUANTILE = 0.99


@dataclass(frozen=True)
class AsipRow:
    n: int
    k_n: int
    variance: float
    quantile: float
    normalized: float


@dataclass(frozen=True)
class AsipResidual:
    """
    Attributes:
        rows: Per ``n``, the 0.99-quantile of ``|S_n - sum_{j <= k_n} Xi_j|``
            and its ratio to ``V_n^{1/p0 + eps}``.
        non_increasing: The normalized quantiles never increase along the grid.
        covariance_growth: ``min_k Var(S_{b_k}) / k``, the linear growth constant.
        decay: Block covariance decay fit.
    """

    p0: float
    eps: float
    rows: list[AsipRow]
    non_increasing: bool
    covariance_growth: float
    decay: "CovarianceDecay | None"


@dataclass(frozen=True)
class CovarianceDecay:
    """``max_i |Cov(Xi_i, Xi_{i+l})|`` per lag and the fitted geometric rate."""

    lags: np.ndarray
    covariances: np.ndarray
    rate: float | None

    @property
    def geometric(self) -> bool:
        return self.rate is None or self.rate < 1.0


def _block_covariance(oracle, first: tuple[int, int], second: tuple[int, int]) -> float:
    (a1, b1), (a2, b2) = first, second
    if b1 + 1 == a2:
        return oracle.cross_covariance(a1, b1, b2)
    return oracle.cross_covariance(a1, a2 - 1, b2) - oracle.cross_covariance(b1 + 1, a2 - 1, b2)


def block_covariance_decay(
    oracle, blocks: list[tuple[int, int]], max_lag: int = 8, max_starts: int = 16
) -> CovarianceDecay:
    """
    Covariances of block sums at increasing block lags.

    The maximum runs over at most ``max_starts`` evenly spread first blocks.
    ``rate`` is ``exp`` of the fitted slope of ``log max |Cov|`` against the lag,
    or None when fewer than two covariances clear the variance tolerance.
    """
    k = len(blocks)
    lags = np.arange(1, min(max_lag, k - 1) + 1)
    covs = []
    for l in lags:
        starts = np.unique(np.linspace(0, k - l - 1, min(max_starts, k - l)).astype(int))
        covs.append(max(abs(_block_covariance(oracle, blocks[i], blocks[i + l])) for i in starts))
    covs = np.array(covs)
    floor = get_config().tolerance.variance
    pos = covs > floor
    rate = None
    if pos.sum() >= 2:
        rate = float(np.exp(linregress(lags[pos], np.log(covs[pos])).slope))
    return CovarianceDecay(lags=lags, covariances=covs, rate=rate)


def asip_residual(
    model: ArrayModel,
    n_grid,
    replicates: int = 2000,
    p0: float = 8.0,
    seed: int = 0,
    eps: float | None = None,
    seq: SequencePartition | None = None,
    n_jobs: int = 1,
    max_lag: int = 8,
) -> AsipResidual:
    """
    Sampled residual of the block approximation of ``S_n`` along a grid of ``n``.

    One partition serves every ``n``; one batch of paths of length
    ``max(n_grid)`` is sampled and truncated.
    """
    n_grid = sorted(int(n) for n in n_grid)
    if not n_grid or n_grid[0] < 1:
        raise DomainError("ASIP grid needs positive sizes")
    eps = get_config().calibration.asip_epsilon if eps is None else eps
    seq = seq or sequence_partition(model, n_max=n_grid[-1])
    if seq.n_max < n_grid[-1]:
        raise DomainError(f"Sequence partition covers {seq.n_max} < {n_grid[-1]}")
    batch = sample_paths(model, seed, replicates, n=n_grid[-1], n_jobs=n_jobs)
    sums = np.zeros((len(batch), batch.n + 1))
    np.cumsum(batch.values, axis=1, out=sums[:, 1:])

    rows = []
    for n in n_grid:
        b = seq.boundary(n)
        residual = np.abs(sums[:, n] - sums[:, b])
        q = float(np.quantile(residual, RESIDUAL_QUANTILE))
        v = float(seq.prefix_variances[n])
        rows.append(AsipRow(n, seq.k_of(n), v, q, q / v ** (1.0 / p0 + eps) if v > 0 else float("nan")))
    normalized = np.array([r.normalized for r in rows])
    non_increasing = bool(np.all(np.diff(normalized) <= 0))

    blocks = seq.complete_blocks
    ks = np.arange(1, len(blocks) + 1)
    growth = float(np.min(seq.prefix_variances[[bb for _, bb in blocks]] / ks))
    decay = None
    if model.is_finite and len(blocks) >= 3:
        decay = block_covariance_decay(ExactVarianceOracle(model), blocks, max_lag)
    logger.info("ASIP residual of %s: normalized quantiles %s", model.model_id, normalized)
    return AsipResidual(p0, eps, rows, non_increasing, growth, decay)


__all__ = ["AsipRow", "AsipResidual", "CovarianceDecay", "block_covariance_decay", "asip_residual"]
