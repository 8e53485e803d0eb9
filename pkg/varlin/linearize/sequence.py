"""Sequence-mode blocks: one n-independent partition serving every prefix length."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from varlin.config.tolerance import get_config
from varlin.errors import DegenerateVarianceError
from varlin.generators.model import ArrayModel
from varlin.linearize.blocks import BlockPartition, CertificationReport, greedy_blocks
from varlin.linearize.constants import GrowthConstants, constants_for_model
from varlin.mixing.profile import MixingProfile, profile_for_model
from varlin.oracle.variance import oracle_for_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SequencePartition:
    """
    Blocks ``B_1, B_2, ...`` built once up to ``n_max`` and the derived constants.

    ``k_map[n]`` is the number of complete blocks inside ``1..n``. ``A1`` and
    ``A2`` bound block norms from below and intermediate norms from above;
    ``R1`` and ``R2`` bracket ``Var(S_n) / k_n`` over ``[n_max / 16, n_max]``.
    """

    partition: BlockPartition
    constants: GrowthConstants
    k_map: np.ndarray
    prefix_variances: np.ndarray
    A1: float
    A2: float
    R1: float
    R2: float
    slope: float
    block_control: np.ndarray
    report: CertificationReport

    @property
    def n_max(self) -> int:
        return self.partition.n

    @property
    def complete_blocks(self) -> list[tuple[int, int]]:
        p = self.partition
        return p.blocks if p.complete else p.blocks[:-1]

    def k_of(self, n: int) -> int:
        return int(self.k_map[n])

    def boundary(self, n: int) -> int:
        """``b_{k_n}``, the end of the last complete block inside ``1..n`` (0 if none)."""
        k = self.k_of(n)
        return self.complete_blocks[k - 1][1] if k else 0


def sequence_partition(
    model: ArrayModel,
    n_max: int | None = None,
    profile: MixingProfile | None = None,
    oracle=None,
    constants: GrowthConstants | None = None,
) -> SequencePartition:
    """
    Build n-independent blocks for a sequence model and certify their growth.

    The greedy scan is the array construction without the final merge; the
    trailing indices that cannot host a core stay an incomplete block.

    Args:
        model: Model whose values do not depend on the row size.
        n_max: Largest prefix, defaults to the row size.
        profile: Mixing profile, defaults to :func:`profile_for_model`.
        oracle: Variance oracle, defaults to :func:`oracle_for_model`.
        constants: Growth constants, defaults to those of the full row.

    Raises:
        DegenerateVarianceError: Not even one complete block fits.
    """
    n_max = model.n if n_max is None else n_max
    oracle = oracle or oracle_for_model(model)
    profile = profile or profile_for_model(model)
    constants = constants or constants_for_model(model, profile, oracle)
    Q = constants.Q
    part = greedy_blocks(oracle, Q, constants.r, n_max, merge_last=False, model_id=model.model_id)
    complete = part.blocks if part.complete else part.blocks[:-1]
    kc = len(complete)
    if kc < 2:
        raise DegenerateVarianceError(f"Only {kc} complete blocks fit in 1..{n_max}")

    ends = np.array([b for _, b in complete])
    k_map = np.searchsorted(ends, np.arange(n_max + 1), side="right")
    prefix = oracle.prefix_variances()
    block_vars = part.block_variances[:kc]
    A1 = min(math.sqrt(part.A), float(np.sqrt(block_vars.min())))
    A2 = float(np.sqrt(part.intermediate_max[:kc].max()))

    ns = np.arange(max(1, n_max // 16), n_max + 1)
    ns = ns[k_map[ns] > 0]
    ratios = prefix[ns] / k_map[ns]
    R1, R2 = float(ratios.min()), float(ratios.max())

    ks = np.arange(1, kc + 1)
    fit = linregress(ks, prefix[ends])
    control = np.array([math.sqrt(oracle.suffix_variances(a, b).max()) for a, b in complete])

    tol = get_config().tolerance.partition
    report = CertificationReport()
    report.add("seq_slope_lower", A1**2, fit.slope, tol * max(1.0, A1**2))
    report.add("seq_slope_upper", fit.slope, 18.0 * Q, tol * max(1.0, Q))
    per_block = prefix[ends] / ks
    report.add("seq_sandwich_lower", Q, float(per_block.min()), tol * max(1.0, Q))
    report.add("seq_sandwich_upper", float(per_block.max()), 18.0 * Q, tol * max(1.0, Q))
    report.add(
        "block_control",
        float(control.max()),
        get_config().calibration.block_control_ratio * float(control[0]),
        tol,
    )
    logger.info(
        "Sequence partition of %s up to %d: %d blocks, A1=%.4g, A2=%.4g, R1=%.4g, R2=%.4g, slope=%.4g",
        model.model_id, n_max, kc, A1, A2, R1, R2, fit.slope,
    )
    return SequencePartition(
        partition=part,
        constants=constants,
        k_map=k_map,
        prefix_variances=prefix,
        A1=A1,
        A2=A2,
        R1=R1,
        R2=R2,
        slope=float(fit.slope),
        block_control=control,
        report=report,
    )


__all__ = ["SequencePartition", "sequence_partition"]
