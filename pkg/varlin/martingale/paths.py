"""Time-changed partial-sum paths, the martingale path and its quadratic variation."""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from varlin.config.tolerance import get_config
from varlin.errors import DomainError
from varlin.generators.sampling import PathBatch
from varlin.linearize.blocks import BlockPartition, CertificationReport
from varlin.linearize.constants import GrowthConstants
from varlin.martingale.coboundary import CoboundaryDecomp
from varlin.oracle.variance import VarianceProfile, variance_profile

logger = logging.getLogger(__name__)

MIN_QV_REPLICATES = 100


def _first_reaching(variances: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """``min{k >= 1 : sigma^2_k >= target}`` for each target."""
    running = np.maximum.accumulate(variances[1:])
    tol = get_config().tolerance.variance * max(1.0, float(running[-1]))
    idx = np.searchsorted(running, np.asarray(targets) - tol, side="left") + 1
    return np.minimum(idx, variances.size - 1)


@dataclass(frozen=True)
class TimeChange:
    """
    Attributes:
        t: Time in ``[0, 1]``.
        v: ``v_n(t)``.
        j: ``j_n(t)``, the block holding ``v_n(t)``.
        gap: ``|sigma^2_{b_j} - t sigma^2|``.
        bound: ``C (K (1 + C_n) + Q + C_n sqrt(Q))`` when constants are given.
    """

    t: float
    v: int
    j: int
    gap: float
    bound: float | None

    @property
    def within_bound(self) -> bool | None:
        return None if self.bound is None else self.gap <= self.bound


def time_change(
    profile: VarianceProfile,
    partition: BlockPartition,
    t: float,
    constants: GrowthConstants | None = None,
) -> TimeChange:
    """
    Minimal index whose prefix variance reaches ``t sigma^2`` and its block.

    Raises:
        DomainError: ``t`` outside ``[0, 1]``.
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"Time {t} outside [0, 1]")
    variances = profile.variances
    v = int(_first_reaching(variances, np.array([t * profile.sigma2]))[0])
    j = partition.block_of(v)
    b = partition.blocks[j - 1][1]
    gap = abs(float(variances[b]) - t * profile.sigma2)
    bound = None
    if constants is not None:
        c = get_config().calibration.time_change_gap_constant
        K, Cn, Q = constants.K, constants.C, constants.Q
        bound = c * (K * (1.0 + Cn) + Q + Cn * math.sqrt(Q))
    return TimeChange(t=t, v=v, j=j, gap=gap, bound=bound)


def time_grid(size: int | None = None) -> np.ndarray:
    size = get_config().budget.qv_grid if size is None else size
    if size < 2:
        raise DomainError(f"Time grid needs at least 2 points, got {size}")
    return np.linspace(0.0, 1.0, size)


@dataclass(frozen=True, eq=False)
class PathPair:
    """
    Step paths of every replicate on a shared time grid.

    ``W`` is ``S_{v(t)} / sigma``, ``cal_W`` is ``S_{b_{j(t)}} / sigma``,
    ``M`` is ``(S_{b_{j(t)}} + R_{b_{j(t)}} - R_0) / sigma`` and ``QV`` is the
    predictable quadratic variation ``<M>_t``. Path arrays have shape
    ``(replicates, len(t))``.
    """

    t: np.ndarray
    v: np.ndarray
    j: np.ndarray
    W: np.ndarray
    cal_W: np.ndarray
    M: np.ndarray
    QV: np.ndarray
    sigma: float
    model_id: str = ""

    @property
    def replicates(self) -> int:
        return self.W.shape[0]

    def to_csv(self, path: str | Path) -> None:
        """Write rows ``replicate, t, W, cal_W, M, QV``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["replicate", "t", "W", "cal_W", "M", "QV"])
            for r in range(self.replicates):
                for i, t in enumerate(self.t):
                    writer.writerow([
                        r,
                        repr(float(t)),
                        repr(float(self.W[r, i])),
                        repr(float(self.cal_W[r, i])),
                        repr(float(self.M[r, i])),
                        repr(float(self.QV[r, i])),
                    ])


def _conditional_increments(decomp: CoboundaryDecomp, batch: PathBatch) -> np.ndarray:
    """``E[D_j^2 | zeta_{a_j - 1}]`` on each path, shape ``(R, k)``."""
    starts = decomp.partition.starts
    cols = [c2[batch.states[:, a - 1]] for c2, a in zip(decomp.conditional_second, starts)]
    return np.stack(cols, axis=1)


def build_path_pair(
    decomp: CoboundaryDecomp,
    batch: PathBatch,
    profile: VarianceProfile | None = None,
    grid_size: int | None = None,
) -> PathPair:
    """Evaluate ``W``, ``cal_W``, ``M`` and ``<M>`` on the time grid for every sampled path."""
    partition = decomp.partition
    if batch.n != partition.n:
        raise DomainError(f"Paths have {batch.n} indices, partition covers {partition.n}")
    profile = profile or variance_profile(decomp.model)
    sigma = decomp.sigma
    t = time_grid(grid_size)
    v = _first_reaching(profile.variances, t * profile.sigma2)
    ends = partition.ends
    j = np.searchsorted(ends, v) + 1
    b = ends[j - 1]

    sums = np.zeros((len(batch), batch.n + 1))
    np.cumsum(batch.values, axis=1, out=sums[:, 1:])
    resid = decomp.residual_on_paths(batch)
    W = sums[:, v] / sigma
    cal_W = sums[:, b] / sigma
    M = (sums[:, b] + resid[:, b] - resid[:, [0]]) / sigma
    qv_blocks = np.cumsum(_conditional_increments(decomp, batch), axis=1) / sigma**2
    QV = qv_blocks[:, j - 1]
    logger.debug("Path pair for %s: %d replicates on %d grid points", decomp.model.model_id, len(batch), t.size)
    return PathPair(t=t, v=v, j=j, W=W, cal_W=cal_W, M=M, QV=QV, sigma=sigma, model_id=decomp.model.model_id)


def ky_fan_distance(deviations: np.ndarray) -> float:
    """
    ``inf{eps > 0 : P(X > eps) < eps}`` under the empirical law of ``deviations``.

    On ``[x_(i+1), x_(i))`` of the descending order statistics the tail mass is
    ``i / R``; the infimum over that interval is ``max(x_(i+1), i / R)`` when it
    lies below ``x_(i)``.
    """
    x = np.sort(np.abs(np.asarray(deviations, dtype=float)))[::-1]
    R = x.size
    if R == 0:
        raise DomainError("Ky Fan distance of an empty sample")
    upper = np.concatenate([[np.inf], x])
    lower = np.concatenate([x, [0.0]])
    mass = np.arange(R + 1) / R
    cand = np.maximum(lower, mass)
    ok = cand < upper
    return float(cand[ok].min())


def lp_norm(samples: np.ndarray, p: float, axis=0) -> np.ndarray:
    """Empirical ``(mean |X|^p)^{1/p}``."""
    return np.mean(np.abs(samples) ** p, axis=axis) ** (1.0 / p)


def prokhorov_bound(sup_deviations: np.ndarray, q: float) -> float:
    """``||sup_t |Q1 - Q2| ||_q^{q/(q+1)}`` for a coupled pair."""
    return float(lp_norm(sup_deviations, q)) ** (q / (q + 1.0))


def block_maxima_bound(norms: np.ndarray, p: float) -> float:
    """``||max_j |Z_j| ||_p <= k^{1/p} max_j ||Z_j||_p``."""
    norms = np.asarray(norms, dtype=float)
    return norms.size ** (1.0 / p) * float(norms.max())


@dataclass(frozen=True)
class QuadraticVariation:
    """
    Attributes:
        t: Time grid.
        qv: ``<M>_t`` per replicate.
        sup_deviation: ``sup_t |<M>_t - t|`` per replicate.
        expected_terminal: ``E<M>_1 = sum_j E[cal_D_j^2]`` (exact).
        deterministic_gap: ``|sum_{j <= j(t)} E[cal_D_j^2] - t|`` on the grid (exact).
        ky_fan: Empirical Ky Fan distance between ``<M>`` and ``t``.
        ky_fan_bound: ``||sup_t |<M>_t - t| ||_q^{q/(q+1)}`` with ``q = p0 / 2``.
        qv_gap_bound: Bound on ``deterministic_gap`` when constants are supplied.
        report: Boundary checks of the orthogonality gap.
    """

    t: np.ndarray
    qv: np.ndarray
    sup_deviation: np.ndarray
    expected_terminal: float
    deterministic_gap: np.ndarray
    ky_fan: float
    ky_fan_bound: float
    qv_gap_bound: float | None
    report: CertificationReport

    @property
    def max_deterministic_gap(self) -> float:
        return float(self.deterministic_gap.max())


def qv_gap_bound(decomp: CoboundaryDecomp, constants: GrowthConstants, beta: float, pi_p0: float) -> float:
    """``C (K D + Q + C_n sqrt(Q) + ||R||_2 (||R||_2 + sqrt(Pi_{p0}) beta sigma)) / sigma^2``."""
    c = get_config().calibration.time_change_gap_constant
    r2 = decomp.residual_2
    s = decomp.sigma
    inner = (
        constants.K * constants.D
        + constants.Q
        + constants.C * math.sqrt(constants.Q)
        + r2 * (r2 + math.sqrt(pi_p0) * beta * s)
    )
    return c * inner / s**2


def orthogonality_report(decomp: CoboundaryDecomp, profile: VarianceProfile) -> CertificationReport:
    """
    At every block end ``b_J``: ``|sum_{j<=J} E[cal_D_j^2] - sigma^2_{b_J} / sigma^2|
    <= 4 ||R||_2 (||R||_2 + sigma_{b_J}) / sigma^2``.
    """
    s2 = decomp.sigma**2
    r2 = decomp.residual_2
    cum = np.cumsum(decomp.expected_squares) / s2
    report = CertificationReport()
    tol = get_config().tolerance.martingale
    for J, b in enumerate(decomp.partition.ends, start=1):
        var_b = max(float(profile.variances[b]), 0.0)
        lhs = abs(float(cum[J - 1]) - var_b / s2)
        rhs = 4.0 * r2 * (r2 + math.sqrt(var_b)) / s2
        report.add(f"orthogonality[{J}]", lhs, rhs, tol)
    return report


def quadratic_variation(
    decomp: CoboundaryDecomp,
    batch: PathBatch,
    profile: VarianceProfile | None = None,
    grid_size: int | None = None,
    constants: GrowthConstants | None = None,
    beta: float = 1.0,
    pi_p0: float = 1.0,
    pairs: PathPair | None = None,
) -> QuadraticVariation:
    """
    Predictable quadratic variation of the martingale path and its distance to ``t``.

    The conditional increments ``E[D_j^2 | zeta_{a_j - 1}]`` are exact state
    functions; only the law of the visited states is sampled.

    Raises:
        DomainError: Fewer than 100 replicates.
    """
    if len(batch) < MIN_QV_REPLICATES:
        raise DomainError(f"Quadratic variation needs at least {MIN_QV_REPLICATES} replicates, got {len(batch)}")
    profile = profile or variance_profile(decomp.model)
    pairs = pairs or build_path_pair(decomp, batch, profile, grid_size)
    t = pairs.t
    sup_dev = np.abs(pairs.QV - t[None, :]).max(axis=1)
    cum = np.cumsum(decomp.normalized_expected_squares)
    deterministic = np.abs(cum[pairs.j - 1] - t)
    q = decomp.p0 / 2.0
    rhs = None if constants is None else qv_gap_bound(decomp, constants, beta, pi_p0)
    result = QuadraticVariation(
        t=t,
        qv=pairs.QV,
        sup_deviation=sup_dev,
        expected_terminal=float(cum[-1]),
        deterministic_gap=deterministic,
        ky_fan=ky_fan_distance(sup_dev),
        ky_fan_bound=prokhorov_bound(sup_dev, q),
        qv_gap_bound=rhs,
        report=orthogonality_report(decomp, profile),
    )
    logger.info(
        "Quadratic variation of %s: E<M>_1=%.6f, Ky Fan=%.4g (bound %.4g)",
        decomp.model.model_id, result.expected_terminal, result.ky_fan, result.ky_fan_bound,
    )
    return result


def lyapunov_sum(block_differences: np.ndarray, sigma: float, p0: float) -> float:
    """``L_{p0} = sum_j ||D_j / sigma||_{p0}^{p0}`` from sampled block differences ``(R, k)``."""
    return float(np.sum(np.mean(np.abs(block_differences / sigma) ** p0, axis=0)))


@dataclass(frozen=True)
class LyapunovBound:
    value: float
    lhs: float
    rhs: float
    passed: bool


def lyapunov_bound(block_differences: np.ndarray, sigma: float, Q: float, p0: float) -> LyapunovBound:
    """``L^{1/(2 p0)} <= C sigma^{-(p0 - 2)/(2 p0)} Q^{-1/(2 p0)} max_j ||D_j||_{p0}``."""
    value = lyapunov_sum(block_differences, sigma, p0)
    lhs = value ** (1.0 / (2.0 * p0))
    c = get_config().calibration.rate_constant
    max_norm = float(lp_norm(block_differences, p0).max())
    rhs = c * sigma ** (-(p0 - 2.0) / (2.0 * p0)) * Q ** (-1.0 / (2.0 * p0)) * max_norm
    return LyapunovBound(value=value, lhs=lhs, rhs=rhs, passed=lhs <= rhs)


@dataclass(frozen=True)
class CoupledBounds:
    """
    Prokhorov upper bounds for the pairs living on one probability space.

    Attributes:
        q: Norm order.
        w_cal_w: ``||sup_t |W - cal_W| ||_q^{q/(q+1)}``.
        w_cal_w_block_bound: The same with the norm replaced by the block-maxima bound.
        cal_w_m: ``||sup_t |cal_W - M| ||_q^{q/(q+1)}``.
        cal_w_m_block_bound: The same with the block-maxima bound.
    """

    q: float
    w_cal_w: float
    w_cal_w_block_bound: float
    cal_w_m: float
    cal_w_m_block_bound: float


def coupled_pair_bounds(decomp: CoboundaryDecomp, batch: PathBatch, pairs: PathPair, q: float | None = None) -> CoupledBounds:
    q = decomp.p0 if q is None else q
    sigma = decomp.sigma
    sup_w = np.abs(pairs.W - pairs.cal_W).max(axis=1)
    sup_m = np.abs(pairs.M - pairs.cal_W).max(axis=1)

    sums = np.zeros((len(batch), batch.n + 1))
    np.cumsum(batch.values, axis=1, out=sums[:, 1:])
    tails = np.empty((len(batch), decomp.partition.k))
    for idx, (a, b) in enumerate(decomp.partition.blocks):
        tails[:, idx] = np.abs(sums[:, [b]] - sums[:, a:b + 1]).max(axis=1)
    resid = decomp.residual_on_paths(batch)
    edges = np.abs(resid[:, decomp.partition.ends] - resid[:, [0]])

    w_block_bound = block_maxima_bound(lp_norm(tails / sigma, q), q)
    m_block_bound = block_maxima_bound(lp_norm(edges / sigma, q), q)
    return CoupledBounds(
        q=q,
        w_cal_w=prokhorov_bound(sup_w, q),
        w_cal_w_block_bound=w_block_bound ** (q / (q + 1.0)),
        cal_w_m=prokhorov_bound(sup_m, q),
        cal_w_m_block_bound=m_block_bound ** (q / (q + 1.0)),
    )


__all__ = [
    "TimeChange",
    "time_change",
    "time_grid",
    "PathPair",
    "build_path_pair",
    "ky_fan_distance",
    "lp_norm",
    "prokhorov_bound",
    "block_maxima_bound",
    "QuadraticVariation",
    "qv_gap_bound",
    "orthogonality_report",
    "quadratic_variation",
    "lyapunov_sum",
    "LyapunovBound",
    "lyapunov_bound",
    "CoupledBounds",
    "coupled_pair_bounds",
]
