"""Greedy variance-linearizing block partitions and their certification."""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from varlin.config.tolerance import get_config
from varlin.errors import DegenerateVarianceError, InvariantViolationError
from varlin.linearize.constants import GrowthConstants

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """
    Blocks ``B_j = [a_j, b_j]`` covering ``1..n`` with cores ``M_j = [a_j, m_j]``.

    Attributes:
        n: Row size.
        blocks: ``(a_j, b_j)`` pairs in order.
        core_ends: ``m_j``, the first index where ``Var(S_{a_j..m})`` reaches the target.
        block_variances: ``Var(S(B_j))``.
        core_variances: ``Var(S(M_j))``.
        intermediate_max: ``max_{m in B_j} Var(S_{a_j..m})``.
        minimality: ``Var(S_{a_j..m_j - 1})`` (0 for one-index cores).
        Q: Block scale; target ``A = 2Q`` plus ``guard``.
        r: Gap length appended after each core.
        total_variance: ``Var(S_n)``.
        guard: Standard-error band added to the target by sampled oracles.
        complete: Whether the last block reached the target (sequence mode).
    """

    n: int
    blocks: list[tuple[int, int]]
    core_ends: list[int]
    block_variances: np.ndarray
    core_variances: np.ndarray
    intermediate_max: np.ndarray
    minimality: np.ndarray
    Q: float
    r: int
    total_variance: float
    guard: float = 0.0
    complete: bool = True
    model_id: str = ""

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def A(self) -> float:
        return 2.0 * self.Q

    @property
    def starts(self) -> np.ndarray:
        return np.array([a for a, _ in self.blocks])

    @property
    def ends(self) -> np.ndarray:
        return np.array([b for _, b in self.blocks])

    def cores(self) -> list[tuple[int, int]]:
        return [(a, m) for (a, _), m in zip(self.blocks, self.core_ends)]

    def block_of(self, index: int) -> int:
        """1-based number of the block containing ``index``."""
        return int(np.searchsorted(self.ends, index)) + 1

    def core_mask(self) -> np.ndarray:
        mask = np.zeros(self.n)
        for a, m in self.cores():
            mask[a - 1 : m] = 1.0
        return mask

    def to_csv(self, path: str | Path) -> None:
        """Write rows ``j, a_j, b_j, core_end, block_variance``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["j", "a_j", "b_j", "core_end", "block_variance"])
            for j, ((a, b), m, v) in enumerate(zip(self.blocks, self.core_ends, self.block_variances), start=1):
                writer.writerow([j, a, b, m, repr(float(v))])


@dataclass(frozen=True)
class Check:
    check_id: str
    lhs: float
    rhs: float
    passed: bool


@dataclass
class CertificationReport:
    """Pass/fail records of the inequalities a partition should satisfy."""

    checks: list[Check] = field(default_factory=list)

    def add(self, check_id: str, lhs: float, rhs: float, tol: float = 0.0, strict: bool = False) -> Check:
        passed = lhs < rhs + tol if strict else lhs <= rhs + tol
        check = Check(check_id, float(lhs), float(rhs), bool(passed))
        self.checks.append(check)
        return check

    def extend(self, other: "CertificationReport") -> None:
        self.checks.extend(other.checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_csv(self, path: str | Path) -> None:
        """Write rows ``check_id, lhs, rhs, pass``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["check_id", "lhs", "rhs", "pass"])
            for c in self.checks:
                writer.writerow([c.check_id, repr(c.lhs), repr(c.rhs), str(c.passed).lower()])


def _guard(oracle, a: int, m: int) -> float:
    if getattr(oracle, "exact", True):
        return 0.0
    return get_config().calibration.guard_sigmas * oracle.standard_error(a, m)


def _find_core(oracle, start: int, n: int, target: float) -> tuple[int, list[float]] | None:
    """First ``m >= start`` with ``Var(S_{start..m}) >= target + guard``, and the scanned prefix variances."""
    seen = []
    for m, v in oracle.iter_prefix(start, n):
        seen.append(v)
        if v >= target and v >= target + _guard(oracle, start, m):
            return m, seen
    return None


def _tolerance(scale: float) -> float:
    return get_config().tolerance.partition * max(1.0, abs(scale))


def _scan(oracle, a: int, b: int) -> tuple[float, float]:
    """``(Var(S_{a..b}), max_{a<=m<=b} Var(S_{a..m}))``."""
    last, peak = 0.0, 0.0
    for _, v in oracle.iter_prefix(a, b):
        last, peak = v, max(peak, v)
    return last, peak


def greedy_blocks(oracle, Q: float, r: int, n: int, merge_last: bool = True, model_id: str = "") -> BlockPartition:
    """
    Run the greedy scan: grow each core until its variance first reaches ``A = 2Q``,
    then append ``r`` gap indices.

    With ``merge_last`` the final block absorbs every index after the last
    core that cannot host a new core; otherwise the leftover indices form an
    incomplete trailing block.
    """
    A = 2.0 * Q
    blocks, core_ends, core_vars, minimality = [], [], [], []
    max_guard = 0.0
    start = 1
    complete = True
    pending = _find_core(oracle, start, n, A)
    while pending is not None:
        m, seen = pending
        core_ends.append(m)
        core_vars.append(seen[-1])
        minimality.append(seen[-2] if len(seen) > 1 else 0.0)
        max_guard = max(max_guard, _guard(oracle, start, m))
        end = min(m + r, n)
        pending = _find_core(oracle, end + 1, n, A) if end < n else None
        if pending is None and merge_last:
            end = n
        blocks.append((start, end))
        start = end + 1
    if start <= n:
        blocks.append((start, n))
        core_ends.append(n)
        tail_var, _ = _scan(oracle, start, n)
        core_vars.append(tail_var)
        minimality.append(0.0)
        complete = False

    block_vars, inter = [], []
    for a, b in blocks:
        v, peak = _scan(oracle, a, b)
        block_vars.append(v)
        inter.append(peak)
    total = oracle.variance(1, n)
    return BlockPartition(
        n=n,
        blocks=blocks,
        core_ends=core_ends,
        block_variances=np.array(block_vars),
        core_variances=np.array(core_vars),
        intermediate_max=np.array(inter),
        minimality=np.array(minimality),
        Q=Q,
        r=r,
        total_variance=total,
        guard=max_guard,
        complete=complete,
        model_id=model_id,
    )


def partition_blocks(oracle, constants: GrowthConstants, n: int | None = None) -> BlockPartition:
    """
    Build the variance-linearizing partition of ``1..n``.

    Args:
        oracle: Exact or Monte Carlo variance oracle.
        constants: Growth constants providing ``Q`` and ``r``.
        n: Row size, defaults to the oracle's.

    Raises:
        DegenerateVarianceError: ``Var(S_n) < 2 A``.
        InvariantViolationError: A block variance leaves ``[Q, 9Q]`` or the
            count sandwich ``Q k <= Var(S_n) <= 18 Q k`` fails.
    """
    n = oracle.n if n is None else n
    Q, r = constants.Q, constants.r
    A = 2.0 * Q
    total = oracle.variance(1, n)
    if total < 2.0 * A:
        raise DegenerateVarianceError(f"Var(S_n)={total:.6g} is below 2A={2 * A:.6g}; no room for two cores")
    model_id = getattr(getattr(oracle, "model", None), "model_id", "")
    part = greedy_blocks(oracle, Q, r, n, merge_last=True, model_id=model_id)

    chain = 4.0 * A + constants.D * r * constants.K**2
    logger.debug(
        "Block bound chain for %s: 4A + D r K^2 = %.6g vs 9Q = %.6g (A=%.6g, D=%.6g, r=%d, K=%.6g)",
        model_id, chain, 9.0 * Q, A, constants.D, r, constants.K,
    )
    for j, ((a, b), m, v, peak) in enumerate(
        zip(part.blocks, part.core_ends, part.block_variances, part.intermediate_max), start=1
    ):
        logger.debug("Block %d: [%d, %d] core end %d, Var=%.6g, max prefix Var=%.6g", j, a, b, m, v, peak)

    slack = part.guard
    for j, v in enumerate(part.block_variances, start=1):
        if not Q - _tolerance(Q) - slack <= v <= 9.0 * Q + _tolerance(9.0 * Q) + slack:
            raise InvariantViolationError(
                "block_variance", f"Block {j} variance {v:.6g} outside [Q, 9Q] = [{Q:.6g}, {9 * Q:.6g}]"
            )
    k = part.k
    if not Q * k - _tolerance(Q * k) - k * slack <= total <= 18.0 * Q * k + _tolerance(18.0 * Q * k) + k * slack:
        raise InvariantViolationError(
            "variance_sandwich", f"Var(S_n)={total:.6g} outside [Qk, 18Qk] with k={k}, Q={Q:.6g}"
        )
    logger.info("Partition of %s: k_n=%d blocks, Q=%.4g, r=%d", model_id, k, Q, r)
    return part


def verify_partition(partition: BlockPartition, oracle, constants: GrowthConstants | None = None) -> CertificationReport:
    """
    Certify a partition with oracle variances.

    Checks: block variances in ``[Q, 9Q]``; the count sandwich; intermediate
    maxima ``<= 9Q``; greedy minimality of every core; comparability
    ``1/2 sum Var(M_i) <= Var(union M_i) <= 3/2 sum Var(M_i)``; the prefix ratio
    ``|Var(B^(k)) / Var(M^(k)) - 1| <= Q / A``; and the gap covariance bound
    ``|Cov(S(D_j), S(M_j))| <= C ||S(D_j)||_2``. Failures are reported, never raised.
    """
    report = CertificationReport()
    Q, A = partition.Q, partition.A
    slack = partition.guard
    k = partition.k

    for j, (v, peak) in enumerate(zip(partition.block_variances, partition.intermediate_max), start=1):
        report.add(f"block_lower[{j}]", Q, v, _tolerance(Q) + slack)
        report.add(f"block_upper[{j}]", v, 9.0 * Q, _tolerance(9.0 * Q) + slack)
        report.add(f"intermediate[{j}]", peak, 9.0 * Q, _tolerance(9.0 * Q) + slack)
    total = partition.total_variance
    report.add("sandwich_lower", Q * k, total, _tolerance(Q * k) + k * slack)
    report.add("sandwich_upper", total, 18.0 * Q * k, _tolerance(18.0 * Q * k) + k * slack)

    for j, ((a, _), m, prev) in enumerate(zip(partition.blocks, partition.core_ends, partition.minimality), start=1):
        if m > a and (partition.complete or j < k):
            report.add(f"minimality[{j}]", prev, A + slack, strict=True)

    mask = partition.core_mask()
    masked = oracle.prefix_variances(mask)
    plain = oracle.prefix_variances()
    cores_total = math.fsum(partition.core_variances)
    union = float(masked[partition.n])
    report.add("core_union_lower", 0.5 * cores_total, union, _tolerance(cores_total) + k * slack)
    report.add("core_union_upper", union, 1.5 * cores_total, _tolerance(cores_total) + k * slack)

    for j, ((_, b), m) in enumerate(zip(partition.blocks, partition.core_ends), start=1):
        ratio = plain[b] / masked[m] if masked[m] > 0 else math.inf
        report.add(f"prefix_ratio[{j}]", abs(ratio - 1.0), Q / A, _tolerance(1.0) + slack / max(masked[m], 1.0))

    if constants is not None:
        for j, ((a, b), m, v_block, v_core) in enumerate(
            zip(partition.blocks, partition.core_ends, partition.block_variances, partition.core_variances), start=1
        ):
            if m >= b:
                continue
            v_gap = oracle.variance(m + 1, b)
            cov = 0.5 * (v_block - v_core - v_gap)
            report.add(f"gap_covariance[{j}]", abs(cov), constants.C * math.sqrt(v_gap), _tolerance(constants.C) + slack)

    failed = report.failures()
    if failed:
        logger.warning("Partition of %s: %d of %d checks failed", partition.model_id, len(failed), len(report.checks))
    return report


__all__ = [
    "BlockPartition",
    "Check",
    "CertificationReport",
    "greedy_blocks",
    "partition_blocks",
    "verify_partition",
]
