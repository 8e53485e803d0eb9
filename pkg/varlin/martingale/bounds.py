"""Closed-form rate-bound calculators and the maximal inequality for block sums."""

import csv
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from varlin.config.tolerance import get_config
from varlin.errors import DomainError, PreconditionError
from varlin.generators.model import ArrayModel
from varlin.generators.sampling import PathBatch
from varlin.linearize.constants import GrowthConstants
from varlin.martingale.coboundary import CoboundaryDecomp
from varlin.martingale.paths import lp_norm
from varlin.mixing.profile import MixingProfile
from varlin.mixing.varpi import varpi_profile, varpi_sum
from varlin.oracle.variance import marginal_norm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SequentialConstants:
    """
    Attributes:
        q_n: ``1 + sum_s varpi_{p0,p0}(s)``.
        a_n: ``min(K_{p0}, sqrt(Q) beta) sqrt(q_n)``.
        iota: ``(1 + sum_s varpi_{p0/2,p0/2}(s))^{1/2}``.
        Pi: ``Pi_{p,n}`` keyed by ``p``.
        C1, A1, A2: The assembled rate constants.
        lyapunov: Sampled Lyapunov sum, when measured.
        ky_fan: Sampled Ky Fan distance, when measured.
    """

    p0: float
    q_n: float
    a_n: float
    iota: float
    Pi: dict
    C1: float
    A1: float
    A2: float
    lyapunov: float | None = None
    ky_fan: float | None = None

    def as_dict(self) -> dict:
        out = asdict(self)
        out["Pi"] = {str(k): v for k, v in self.Pi.items()}
        return out


def sequential_constants(
    profile: MixingProfile,
    constants: GrowthConstants,
    K_p0: float,
    p0: float | None = None,
    lyapunov: float | None = None,
    ky_fan: float | None = None,
) -> SequentialConstants:
    """
    Assemble ``C1``, ``A1`` and ``A2`` from their max-lists.

    Every listed term enters literally; the list is then raised to
    ``p0 / (2 p0 + 4)``.
    """
    p0 = constants.p0 if p0 is None else p0
    if p0 <= 2:
        raise DomainError(f"Moment order p0 must exceed 2, got {p0}")
    Q, beta, sigma = constants.Q, constants.beta, constants.sigma
    K, C = constants.K, constants.C
    q = varpi_sum(profile, p0)
    half = varpi_sum(profile, p0 / 2.0)
    iota = math.sqrt(half)
    a = min(K_p0, math.sqrt(Q) * beta) * math.sqrt(q)
    power = p0 / (2.0 * p0 + 4.0)

    c1_terms = [
        K * (1.0 + C),
        Q,
        C * math.sqrt(Q),
        a * a,
        a * beta,
        math.sqrt(q) * beta * Q ** (0.5 - 2.0 / p0),
        q * beta**2 * math.sqrt(Q),
        a * Q ** (-2.0 / p0),
        a / math.sqrt(Q),
        a * beta / math.sqrt(Q),
        a ** (p0 / (p0 + 1.0)),
    ]
    C1 = max(c1_terms) ** power
    A1 = C1 + Q ** ((p0 - 4.0) / (2.0 * p0 + 2.0)) * beta ** (p0 / (p0 + 1.0))
    a2_terms = [
        a / Q,
        iota * a / (math.sqrt(Q) * sigma),
        iota * beta * (math.sqrt(q) + a),
        iota * a * a / math.sqrt(Q),
    ]
    A2 = A1 + max(a2_terms) ** power
    logger.debug("Sequential constants: q=%.4g a=%.4g iota=%.4g C1=%.4g A1=%.4g A2=%.4g", q, a, iota, C1, A1, A2)
    return SequentialConstants(
        p0=p0,
        q_n=q,
        a_n=a,
        iota=iota,
        Pi={p0: q, 2.0: varpi_sum(profile, 2.0)},
        C1=C1,
        A1=A1,
        A2=A2,
        lyapunov=lyapunov,
        ky_fan=ky_fan,
    )


def grouping_rate(l_n: float, sigma: float, p0: float) -> float:
    """``l^{1/2} / sigma + l sigma^{-2(1 - 2/p0)} + l^{-1/2}``."""
    return math.sqrt(l_n) / sigma + l_n * sigma ** (-2.0 * (1.0 - 2.0 / p0)) + 1.0 / math.sqrt(l_n)


def memory_rate(l_n: float, sigma: float, p0: float, r_memory: float) -> float:
    """``l sigma^{-2(1 - 2/p0)} + l^{1/2} / sigma + r_n(p0, [l/2]) l^{-1/2}``."""
    return l_n * sigma ** (-2.0 * (1.0 - 2.0 / p0)) + math.sqrt(l_n) / sigma + r_memory / math.sqrt(l_n)


def _rate_rhs(A: float, sigma: float, x: float, p0: float) -> float:
    c = get_config().calibration.rate_constant
    head = sigma ** (-(p0 - 2.0) / (2.0 * p0)) * abs(math.log(sigma)) ** 0.75
    tail = x ** (p0 / (2.0 * p0 + 4.0)) * math.sqrt(abs(math.log(x))) if x > 0 else 0.0
    return c * A * (head + tail)


@dataclass(frozen=True)
class RateBounds:
    n: int
    sigma: float
    l_n: float
    grouping_rate: float
    memory_rate: float
    rhs_grouping: float
    rhs_memory: float
    A1: float
    A2: float
    r_memory: float = 0.0


def rate_bounds(
    constants: GrowthConstants,
    seq: SequentialConstants,
    l_n: float,
    p0: float | None = None,
    r_memory: float = 0.0,
) -> RateBounds:
    """
    Evaluate the Prokhorov-rate right-hand sides for a grouping length ``l_n``.

    Raises:
        DomainError: ``l_n < 1``.
        PreconditionError: ``l_n > sigma^2 / (18 Q)``.
    """
    p0 = seq.p0 if p0 is None else p0
    if l_n < 1:
        raise DomainError(f"Grouping length must be at least 1, got {l_n}")
    sigma = constants.sigma
    limit = sigma**2 / (18.0 * constants.Q)
    if l_n > limit:
        raise PreconditionError(f"Grouping length {l_n} exceeds sigma^2 / (18 Q) = {limit:.4g}")
    fq = grouping_rate(l_n, sigma, p0)
    w = memory_rate(l_n, sigma, p0, r_memory)
    return RateBounds(
        n=constants.n,
        sigma=sigma,
        l_n=l_n,
        grouping_rate=fq,
        memory_rate=w,
        rhs_grouping=_rate_rhs(seq.A1, sigma, fq, p0),
        rhs_memory=_rate_rhs(seq.A2, sigma, w, p0),
        A1=seq.A1,
        A2=seq.A2,
        r_memory=r_memory,
    )


def write_bounds_csv(rows: list[RateBounds], path: str | Path) -> None:
    """Write rows ``n, sigma, q_n_frak, w_n, rhs_thm24, rhs_thm25, A1, A2``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "sigma", "q_n_frak", "w_n", "rhs_thm24", "rhs_thm25", "A1", "A2"])
        for r in rows:
            writer.writerow([r.n, repr(r.sigma), repr(r.grouping_rate), repr(r.memory_rate), repr(r.rhs_grouping), repr(r.rhs_memory), repr(r.A1), repr(r.A2)])


def memory_coefficient(
    model: ArrayModel,
    p: float,
    m: int,
    profile: MixingProfile,
    constants: GrowthConstants,
    K_p: float | None = None,
) -> float:
    """
    Bound on ``r_n(p, m)``, the cost of forgetting all but the last ``m + 1`` states.

    Exactly 0 when ``m`` covers the declared memory or the whole row. Otherwise
    ``m c_n(p, m) + C min(K_p, beta sqrt(Q)) sum_{k > m} varpi_{p0,p0}(k)``
    with ``c_n(p, m)`` estimated by ``2 K_p varpi_{p,p}(m + 1)``.
    """
    if m < 0:
        raise DomainError(f"Memory must be non-negative, got {m}")
    if m >= model.n or (model.memory is not None and m >= model.memory):
        return 0.0
    K_p = marginal_norm(model, p) if K_p is None else K_p
    p0 = constants.p0
    varpi_p = varpi_profile(profile, p)
    c_n = 2.0 * K_p * (float(varpi_p[m]) if m < varpi_p.size else 0.0)
    tail = varpi_sum(profile, p0, start=m + 1) - 1.0
    c = get_config().calibration.memory_constant
    return m * c_n + c * min(K_p, constants.beta * math.sqrt(constants.Q)) * tail


def maximal_constant(p: float) -> float:
    """``C_p`` of the maximal form; 16 for ``p = 2``."""
    if p < 2:
        raise DomainError(f"Maximal inequality needs p >= 2, got {p}")
    if p == 2:
        return 16.0
    return (1.0 - 2.0 ** ((1.0 - p) / (2.0 * p))) ** (-2.0 * p) * (2.0 * p) ** (p / 2.0)


def martingale_b_terms(summands: np.ndarray, p: float) -> np.ndarray:
    """``b_i = ||X_i^2||_{p/2} = ||X_i||_p^2`` for martingale differences ``(R, m)``."""
    return lp_norm(summands, p) ** 2


def block_b_terms(decomp: CoboundaryDecomp, batch: PathBatch, p: float) -> np.ndarray:
    """
    ``b_i = max_{i <= l <= k} ||Xi_i sum_{j=i..l} E[Xi_j | zeta_{b_i}]||_{p/2}`` for block sums.

    ``E[sum_{j=i+1..l} Xi_j | zeta_{b_i}] = R_{b_i} - E[R_{b_l} | zeta_{b_i}]``;
    the pulled-back ``R_{b_l}`` come from one backward sweep per ``l``.
    """
    model = decomp.model
    ends = decomp.partition.ends
    k = ends.size
    xi = block_sums(batch, decomp.partition)
    rows = np.arange(len(batch))
    pulled = np.empty((k, k, model.n_states))
    for l in range(k):
        vec = decomp.residuals[ends[l]]
        pos = ends[l]
        for i in range(l, -1, -1):
            while pos > ends[i]:
                vec = model.pull(pos, vec)
                pos -= 1
            pulled[l, i] = vec
    b = np.zeros(k)
    half = p / 2.0
    for i in range(k):
        s = batch.states[rows, ends[i]]
        own = xi[:, i]
        r_i = decomp.residuals[ends[i]][s]
        best = 0.0
        for l in range(i, k):
            h = r_i - pulled[l, i][s] if l > i else 0.0
            best = max(best, float(lp_norm(own * (own + h), half)))
        b[i] = best
    return b


def block_sums(batch: PathBatch, partition) -> np.ndarray:
    """``Xi_j = S(B_j)`` per replicate, shape ``(R, k)``."""
    sums = np.zeros((len(batch), batch.n + 1))
    np.cumsum(batch.values, axis=1, out=sums[:, 1:])
    return sums[:, partition.ends] - sums[:, partition.starts - 1]


@dataclass(frozen=True)
class MaximalCheck:
    """
    Attributes:
        p: Norm order.
        norm_sum: ``||S_m||_p`` (sampled).
        bound_sum: ``(2 p sum b_i)^{1/2}``.
        norm_max: ``||max_k |S_k| ||_p`` (sampled).
        bound_max: ``C_p (sum b_i)^{1/2}``.
        guard: Sampling band added before comparing.
    """

    p: float
    norm_sum: float
    bound_sum: float
    norm_max: float
    bound_max: float
    guard: float

    @property
    def slack(self) -> float:
        return self.bound_sum - self.norm_sum

    @property
    def passed(self) -> bool:
        return self.norm_sum <= self.bound_sum + self.guard and self.norm_max <= self.bound_max + self.guard


def _norm_se(x: np.ndarray, p: float) -> float:
    powers = np.abs(x) ** p
    m = float(powers.mean())
    if m <= 0 or x.size < 2:
        return 0.0
    se = float(powers.std(ddof=1)) / math.sqrt(x.size)
    return (1.0 / p) * m ** (1.0 / p - 1.0) * se


def maximal_inequality_check(summands: np.ndarray, b: np.ndarray, p: float) -> MaximalCheck:
    """
    Compare sampled norms of ``S_m`` and ``max_k |S_k|`` with their ``b``-term bounds.

    Args:
        summands: ``X_1..X_m`` per replicate, shape ``(R, m)``.
        b: The ``b_i`` terms.
        p: Norm order, at least 2.
    """
    summands = np.atleast_2d(np.asarray(summands, dtype=float))
    b = np.asarray(b, dtype=float)
    if b.shape != (summands.shape[1],):
        raise DomainError(f"Expected {summands.shape[1]} b terms, got {b.shape}")
    total = math.fsum(b)
    partial = np.cumsum(summands, axis=1)
    final = partial[:, -1]
    running = np.abs(partial).max(axis=1)
    guard = get_config().calibration.guard_sigmas * max(_norm_se(final, p), _norm_se(running, p))
    check = MaximalCheck(
        p=p,
        norm_sum=float(lp_norm(final, p)),
        bound_sum=math.sqrt(2.0 * p * total),
        norm_max=float(lp_norm(running, p)),
        bound_max=maximal_constant(p) * math.sqrt(total),
        guard=guard,
    )
    logger.debug("Maximal inequality at p=%s: %s", p, check)
    return check


__all__ = [
    "SequentialConstants",
    "sequential_constants",
    "grouping_rate",
    "memory_rate",
    "RateBounds",
    "rate_bounds",
    "write_bounds_csv",
    "memory_coefficient",
    "maximal_constant",
    "martingale_b_terms",
    "block_b_terms",
    "block_sums",
    "MaximalCheck",
    "maximal_inequality_check",
]
