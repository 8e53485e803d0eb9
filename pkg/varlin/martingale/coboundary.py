"""Martingale-coboundary decomposition of finite-state arrays.

With ``R_j(s) = E[sum_{i>j} xi_i | zeta_j = s]`` (so ``R_n = 0``), the
differences ``d_j = xi_j + R_j(zeta_j) - R_{j-1}(zeta_{j-1})`` are martingale
differences and ``sum_{j<=m} d_j = S_m + R_m - R_0``. Block sums
``D_j = sum_{i in B_j} d_i`` are martingale differences for the block
filtration.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from varlin.config.tolerance import get_config
from varlin.errors import DomainError, InvariantViolationError
from varlin.generators.model import ArrayModel
from varlin.generators.sampling import PathBatch
from varlin.linearize.blocks import BlockPartition

logger = logging.getLogger(__name__)


def future_conditional_sums(model: ArrayModel) -> np.ndarray:
    """``R_j`` for ``j = 0..n`` by one backward sweep, shape ``(n + 1, |S|)``."""
    model.require_finite()
    g = model.observables
    out = np.zeros((model.n + 1, model.n_states))
    for j in range(model.n, 0, -1):
        out[j - 1] = model.pull(j, g[j - 1] + out[j])
    return out


def future_conditional_sum(model: ArrayModel, j: int) -> np.ndarray:
    """``R_j`` as a state-indexed vector."""
    if not 0 <= j <= model.n:
        raise DomainError(f"Index {j} outside 0..{model.n}")
    return future_conditional_sums(model)[j]


def residual_norm(model: ArrayModel, residuals: np.ndarray, p: float) -> float:
    """``||R||_{p,n} = max_j ||R_j(zeta_j)||_p`` under the exact marginals."""
    weights = model.marginals
    absr = np.abs(residuals)
    if math.isinf(p):
        return float(np.max(absr, where=weights > 0, initial=0.0))
    return float(np.max(np.einsum("js,js->j", weights, absr**p) ** (1.0 / p)))


@dataclass(frozen=True, eq=False)
class CoboundaryDecomp:
    """
    Exact decomposition data of one model and partition.

    Attributes:
        residuals: ``R_j(s)``, shape ``(n + 1, |S|)``.
        conditional_second: Per block, ``E[D_j^2 | zeta_{a_j - 1} = s]``.
        expected_squares: ``E[D_j^2]`` per block.
        martingale_residual: ``max_{j, s} |E[D_j | zeta_{a_j - 1} = s]|``.
        sigma: ``sigma_n``.
        p0: Moment order of ``residual_p0``.
        residual_p0: ``||R||_{p0,n}``.
        residual_2: ``||R||_{2,n}``.
    """

    model: ArrayModel
    partition: BlockPartition
    residuals: np.ndarray
    conditional_second: list[np.ndarray]
    expected_squares: np.ndarray
    martingale_residual: float
    sigma: float
    p0: float
    residual_p0: float
    residual_2: float

    @property
    def normalized_expected_squares(self) -> np.ndarray:
        """``E[cal_D_j^2] = E[D_j^2] / sigma^2``."""
        return self.expected_squares / self.sigma**2

    def residual_on_paths(self, batch: PathBatch) -> np.ndarray:
        """``R_j(zeta_j)`` along sampled paths, shape ``(R, n + 1)``."""
        idx = np.arange(batch.states.shape[1])
        return self.residuals[idx[None, :], batch.states]

    def differences(self, batch: PathBatch) -> np.ndarray:
        """``d_j`` along sampled paths, shape ``(R, n)``."""
        r = self.residual_on_paths(batch)
        return batch.values + r[:, 1:] - r[:, :-1]

    def block_differences(self, batch: PathBatch) -> np.ndarray:
        """``D_j`` along sampled paths, shape ``(R, k)``."""
        d = self.differences(batch)
        cs = np.concatenate([np.zeros((d.shape[0], 1)), np.cumsum(d, axis=1)], axis=1)
        ends = self.partition.ends
        starts = self.partition.starts
        return cs[:, ends] - cs[:, starts - 1]

    def telescoping_residual(self, batch: PathBatch) -> float:
        """``max_m |sum_{j<=m} d_j - (S_m + R_m - R_0)|`` relative to ``max(1, max |S_m|)``."""
        r = self.residual_on_paths(batch)
        d = batch.values + r[:, 1:] - r[:, :-1]
        partial = np.cumsum(batch.values, axis=1)
        lhs = np.cumsum(d, axis=1)
        rhs = partial + r[:, 1:] - r[:, [0]]
        scale = max(1.0, float(np.abs(partial).max()))
        return float(np.abs(lhs - rhs).max()) / scale


def _block_moments(model: ArrayModel, residuals: np.ndarray, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """``E[X | zeta_{a-1}]`` and ``E[X^2 | zeta_{a-1}]`` for ``X = sum_{i=a..b} xi_i + R_b(zeta_b)``."""
    g = model.observables
    e = g[b - 1] + residuals[b]
    z = e * e
    for t in range(b - 1, a - 1, -1):
        pe = model.pull(t + 1, e)
        pz = model.pull(t + 1, z)
        gt = g[t - 1]
        z = gt * gt + 2.0 * gt * pe + pz
        e = gt + pe
    return model.pull(a, e), model.pull(a, z)


def martingale_differences(model: ArrayModel, partition: BlockPartition, p0: float = 4.0) -> CoboundaryDecomp:
    """
    Build the decomposition and certify the martingale property exactly.

    For each block the backward sweep yields ``E[X | zeta_{a-1}]`` and
    ``E[X^2 | zeta_{a-1}]``; then ``E[D | s] = E[X | s] - R_{a-1}(s)`` and
    ``E[D^2 | s] = E[X^2 | s] - 2 R E[X | s] + R^2``.

    Raises:
        UnsupportedModelError: Not a finite-state model.
        InvariantViolationError: ``|E[D_j | state]|`` above the martingale tolerance.
    """
    model.require_finite()
    if partition.n != model.n:
        raise DomainError(f"Partition covers {partition.n} indices, model has {model.n}")
    residuals = future_conditional_sums(model)
    marg = model.marginals
    worst = 0.0
    cond_second, expected = [], []
    for a, b in partition.blocks:
        mean_x, second_x = _block_moments(model, residuals, a, b)
        r = residuals[a - 1]
        reachable = marg[a - 1] > 0
        if reachable.any():
            worst = max(worst, float(np.abs(mean_x - r)[reachable].max()))
        c2 = second_x - 2.0 * r * mean_x + r * r
        cond_second.append(c2)
        expected.append(float(np.dot(marg[a - 1], c2)))
    expected = np.array(expected)
    scale = max(1.0, float(np.abs(residuals).max()))
    tol = get_config().tolerance.martingale * scale
    if worst > tol:
        raise InvariantViolationError("martingale_property", f"max |E[D_j | state]| = {worst:.3e} exceeds {tol:.1e}")

    sigma = math.sqrt(partition.total_variance)
    decomp = CoboundaryDecomp(
        model=model,
        partition=partition,
        residuals=residuals,
        conditional_second=cond_second,
        expected_squares=expected,
        martingale_residual=worst,
        sigma=sigma,
        p0=p0,
        residual_p0=residual_norm(model, residuals, p0),
        residual_2=residual_norm(model, residuals, 2.0),
    )
    logger.info(
        "Decomposition of %s: %d blocks, max |E[D|state]|=%.2e, ||R||_2=%.4g",
        model.model_id, partition.k, worst, decomp.residual_2,
    )
    return decomp


def variance_transfer_gap(decomp: CoboundaryDecomp) -> float:
    """``|sum_j E[D_j^2] - (sigma^2 - E[R_0^2])|``; zero by orthogonality since ``E[S_n | zeta_0] = R_0``."""
    r0 = decomp.residuals[0]
    target = decomp.sigma**2 - float(np.dot(decomp.model.marginals[0], r0 * r0))
    return abs(math.fsum(decomp.expected_squares) - target)


@dataclass(frozen=True)
class ResidualBoundCheck:
    lhs: float
    rhs: float
    passed: bool


def residual_bound_check(decomp: CoboundaryDecomp, K_p0: float, Q: float, beta: float, pi_p0: float) -> ResidualBoundCheck:
    """``||R||_{p0} <= min(K_{p0}, sqrt(Q) beta) Pi_{p0}``."""
    rhs = min(K_p0, math.sqrt(Q) * beta) * pi_p0
    tol = get_config().tolerance.martingale * max(1.0, rhs)
    return ResidualBoundCheck(decomp.residual_p0, rhs, decomp.residual_p0 <= rhs + tol)


__all__ = [
    "future_conditional_sums",
    "future_conditional_sum",
    "residual_norm",
    "CoboundaryDecomp",
    "martingale_differences",
    "variance_transfer_gap",
    "ResidualBoundCheck",
    "residual_bound_check",
]
