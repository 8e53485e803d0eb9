"""
Variance oracles for partial sums.

The exact oracle runs forward recursions on finite-state models; the Monte
Carlo oracle estimates the same quantities from sampled paths and reports
standard errors. Both expose the same interface so the block construction can
run on either.
"""

import csv
import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from varlin.errors import DomainError, UnsupportedModelError
from varlin.generators.model import ArrayModel, ModelKind
from varlin.generators.sampling import sample_paths

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VarianceProfile:
    """Prefix variances ``sigma^2_k`` for ``k = 0..n`` (``variances[0] == 0``)."""

    variances: np.ndarray
    model_id: str = ""

    @property
    def n(self) -> int:
        return int(self.variances.size - 1)

    @property
    def sigma2(self) -> float:
        return float(self.variances[-1])

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def to_csv(self, path: str | Path) -> None:
        """Write rows ``k, variance``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "variance"])
            for k, v in enumerate(self.variances):
                writer.writerow([k, repr(float(v))])


def _check_range(model: ArrayModel, a: int, b: int) -> None:
    if not 1 <= a <= b <= model.n:
        raise DomainError(f"Index range [{a}, {b}] outside 1..{model.n}")


class ExactVarianceOracle:
    """
    Exact variances and covariances of a finite-state model.

    The prefix scan carries ``u_m(s) = E[S_{a..m} 1{zeta_m = s}]`` and the
    accumulated second moment, so one pass over ``[a, b]`` costs
    ``O((b - a) |S|^2)`` and yields every prefix variance on the way.
    """

    exact = True

    def __init__(self, model: ArrayModel):
        model.require_finite()
        self.model = model
        self._g = model.observables
        self._pi = model.marginals

    @property
    def n(self) -> int:
        return self.model.n

    def _masked(self, j: int, mask: np.ndarray | None) -> np.ndarray:
        g = self._g[j - 1]
        return g if mask is None else g * mask[j - 1]

    def iter_prefix(self, start: int, stop: int | None = None, mask: np.ndarray | None = None) -> Iterator[tuple[int, float]]:
        """
        Lazily yield ``(m, Var(sum_{j=start..m} mask_j xi_j))`` for ``m = start..stop``.

        Args:
            start: First index of the sum.
            stop: Last index, defaults to ``n``.
            mask: Optional per-index weights of shape ``(n,)``.
        """
        stop = self.n if stop is None else stop
        _check_range(self.model, start, stop)
        pi = self._pi
        g = self._masked(start, mask)
        u = pi[start] * g
        mean = float(u.sum())
        second = float(np.dot(pi[start], g * g))
        yield start, max(second - mean * mean, 0.0)
        for j in range(start + 1, stop + 1):
            g = self._masked(j, mask)
            u = self.model.push(j, u)
            weighted = pi[j] * g
            second += 2.0 * float(np.dot(u, g)) + float(np.dot(weighted, g))
            u = u + weighted
            mean += float(weighted.sum())
            yield j, max(second - mean * mean, 0.0)

    def variance(self, a: int, b: int, mask: np.ndarray | None = None) -> float:
        """Exact ``Var(sum_{j=a..b} xi_j)``."""
        value = 0.0
        for _, value in self.iter_prefix(a, b, mask):
            pass
        return value

    def prefix_variances(self, mask: np.ndarray | None = None) -> np.ndarray:
        """``Var(S_k)`` for ``k = 0..n`` in one pass, optionally over a masked sum."""
        out = np.zeros(self.n + 1)
        for m, v in self.iter_prefix(1, self.n, mask):
            out[m] = v
        return out

    def suffix_variances(self, a: int, b: int) -> np.ndarray:
        """``Var(sum_{j=t..b} xi_j)`` for ``t = a..b`` by one backward sweep.

        Entry ``t - a`` holds the value for start ``t``.
        """
        _check_range(self.model, a, b)
        g = self._g
        e = g[b - 1].copy()
        z = g[b - 1] ** 2
        out = np.empty(b - a + 1)
        out[b - a] = max(float(np.dot(self._pi[b], z) - np.dot(self._pi[b], e) ** 2), 0.0)
        for t in range(b - 1, a - 1, -1):
            pe = self.model.pull(t + 1, e)
            pz = self.model.pull(t + 1, z)
            gt = g[t - 1]
            z = gt * gt + 2.0 * gt * pe + pz
            e = gt + pe
            mean = float(np.dot(self._pi[t], e))
            out[t - a] = max(float(np.dot(self._pi[t], z)) - mean * mean, 0.0)
        return out

    def covariance(self, i: int, j: int) -> float:
        """Exact ``Cov(xi_i, xi_j)`` through the joint law of ``(zeta_i, zeta_j)``."""
        if i > j:
            i, j = j, i
        _check_range(self.model, i, j)
        x = self._pi[i] * self._g[i - 1]
        for t in range(i + 1, j + 1):
            x = self.model.push(t, x)
        mean_i = float(np.dot(self._pi[i], self._g[i - 1]))
        mean_j = float(np.dot(self._pi[j], self._g[j - 1]))
        return float(np.dot(x, self._g[j - 1])) - mean_i * mean_j

    def cross_covariance(self, a: int, b: int, c: int) -> float:
        """Exact ``Cov(S_{a..b}, S_{b+1..c})``."""
        _check_range(self.model, a, c)
        if not a <= b < c:
            raise DomainError(f"Need a <= b < c, got ({a}, {b}, {c})")
        pi, g = self._pi, self._g
        u = pi[a] * g[a - 1]
        mean_left = float(u.sum())
        for j in range(a + 1, b + 1):
            u = self.model.push(j, u) + pi[j] * g[j - 1]
            mean_left += float(np.dot(pi[j], g[j - 1]))
        cross = 0.0
        mean_right = 0.0
        for j in range(b + 1, c + 1):
            u = self.model.push(j, u)
            cross += float(np.dot(u, g[j - 1]))
            mean_right += float(np.dot(pi[j], g[j - 1]))
        return cross - mean_left * mean_right

    def standard_error(self, a: int, b: int) -> float:
        return 0.0

    def marginal_norm(self, p: float) -> float:
        return marginal_norm(self.model, p)


class MonteCarloVarianceOracle:
    """
    Sampled variances with standard errors, for models without an exact oracle.

    Prefix sums of all replicates are held in memory, so queries after
    construction are vectorized column operations.
    """

    exact = False

    def __init__(self, model: ArrayModel, replicates: int = 2000, seed: int = 0, n_jobs: int = 1):
        if replicates < 2:
            raise DomainError("Monte Carlo variance needs at least 2 replicates")
        self.model = model
        self.replicates = replicates
        self.seed = seed
        batch = sample_paths(model, seed, replicates, n_jobs=n_jobs)
        self._values = batch.values
        self._cumsum = np.concatenate([np.zeros((replicates, 1)), np.cumsum(batch.values, axis=1)], axis=1)
        logger.info("Monte Carlo variance oracle for %s: %d replicates", model.model_id, replicates)

    @property
    def n(self) -> int:
        return self.model.n

    def _sums(self, a: int, b: np.ndarray | int, mask: np.ndarray | None = None) -> np.ndarray:
        if mask is None:
            cs = self._cumsum
        else:
            cs = np.concatenate(
                [np.zeros((self.replicates, 1)), np.cumsum(self._values * mask[None, :], axis=1)], axis=1
            )
        return cs[:, b] - cs[:, a - 1][:, None] if np.ndim(b) else cs[:, b] - cs[:, a - 1]

    def iter_prefix(self, start: int, stop: int | None = None, mask: np.ndarray | None = None) -> Iterator[tuple[int, float]]:
        stop = self.n if stop is None else stop
        _check_range(self.model, start, stop)
        idx = np.arange(start, stop + 1)
        var = self._sums(start, idx, mask).var(axis=0, ddof=1)
        for m, v in zip(idx, var):
            yield int(m), float(v)

    def variance(self, a: int, b: int, mask: np.ndarray | None = None) -> float:
        _check_range(self.model, a, b)
        return float(self._sums(a, b, mask).var(ddof=1))

    def prefix_variances(self, mask: np.ndarray | None = None) -> np.ndarray:
        out = np.zeros(self.n + 1)
        for m, v in self.iter_prefix(1, self.n, mask):
            out[m] = v
        return out

    def suffix_variances(self, a: int, b: int) -> np.ndarray:
        _check_range(self.model, a, b)
        starts = np.arange(a, b + 1)
        sums = self._cumsum[:, b][:, None] - self._cumsum[:, starts - 1]
        return sums.var(axis=0, ddof=1)

    def covariance(self, i: int, j: int) -> float:
        x, y = self._values[:, i - 1], self._values[:, j - 1]
        return float(np.cov(x, y, ddof=1)[0, 1])

    def cross_covariance(self, a: int, b: int, c: int) -> float:
        if not a <= b < c:
            raise DomainError(f"Need a <= b < c, got ({a}, {b}, {c})")
        left = self._sums(a, b)
        right = self._sums(b + 1, c)
        return float(np.cov(left, right, ddof=1)[0, 1])

    def standard_error(self, a: int, b: int) -> float:
        """Standard error of the sample variance ``sqrt((m4 - s^4) / R)``."""
        sums = self._sums(a, b)
        centered = sums - sums.mean()
        m2 = float(np.mean(centered**2))
        m4 = float(np.mean(centered**4))
        return math.sqrt(max(m4 - m2 * m2, 0.0) / self.replicates)

    def marginal_norm(self, p: float) -> float:
        """Sampled ``max_j ||xi_j||_p``."""
        absx = np.abs(self._values)
        if math.isinf(p):
            return float(absx.max())
        return float(np.max(np.mean(absx**p, axis=0) ** (1.0 / p)))


VarianceOracle = ExactVarianceOracle | MonteCarloVarianceOracle


def oracle_for_model(model: ArrayModel, replicates: int = 2000, seed: int = 0, n_jobs: int = 1) -> VarianceOracle:
    """Exact oracle for finite-state models, Monte Carlo otherwise."""
    if model.is_finite:
        return ExactVarianceOracle(model)
    return MonteCarloVarianceOracle(model, replicates=replicates, seed=seed, n_jobs=n_jobs)


def variance_profile(model: ArrayModel, oracle: VarianceOracle | None = None) -> VarianceProfile:
    """Prefix variances ``sigma^2_{k,n}`` of a model."""
    oracle = oracle or oracle_for_model(model)
    return VarianceProfile(oracle.prefix_variances(), model.model_id)


def variance_of_range(model: ArrayModel, a: int, b: int) -> float:
    """Exact ``Var(sum_{j=a..b} xi_j)`` for a finite-state model."""
    return ExactVarianceOracle(model).variance(a, b)


def covariance(model: ArrayModel, i: int, j: int) -> float:
    """Exact ``Cov(xi_i, xi_j)`` for a finite-state model."""
    return ExactVarianceOracle(model).covariance(i, j)


def cross_covariance(model: ArrayModel, a: int, b: int, c: int) -> float:
    """Exact ``Cov(S_{a..b}, S_{b+1..c})`` for a finite-state model."""
    return ExactVarianceOracle(model).cross_covariance(a, b, c)


def marginal_norm(model: ArrayModel, p: float) -> float:
    """
    ``K_{p,n} = max_j ||xi_j||_p`` computed from the exact marginals.

    ``p = inf`` gives the essential supremum over reachable states.
    """
    if model.kind == ModelKind.SEQUENTIAL_EXPANDING:
        raise UnsupportedModelError("Exact norms need a finite-state model")
    if p < 1:
        raise DomainError(f"Norm index must be at least 1, got {p}")
    if math.isinf(p):
        return sup_norm(model)
    pi = model.marginals[1:]
    absg = np.abs(model.observables)
    return float(np.max(np.einsum("js,js->j", pi, absg**p) ** (1.0 / p)))


def sup_norm(model: ArrayModel) -> float:
    """``K_{inf,n}``: largest ``|xi_j|`` over states with positive probability."""
    model.require_finite()
    reachable = model.marginals[1:] > 0
    return float(np.max(np.abs(model.observables), where=reachable, initial=0.0))


__all__ = [
    "VarianceProfile",
    "ExactVarianceOracle",
    "MonteCarloVarianceOracle",
    "VarianceOracle",
    "oracle_for_model",
    "variance_profile",
    "variance_of_range",
    "covariance",
    "cross_covariance",
    "marginal_norm",
    "sup_norm",
]
