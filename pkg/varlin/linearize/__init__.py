"""Growth constants and variance-linearizing block partitions."""

from varlin.linearize.beta import BetaEstimate, analytic_beta, block_window_maxima, estimate_beta, first_mixing_lag
from varlin.linearize.blocks import BlockPartition, CertificationReport, Check, greedy_blocks, partition_blocks, verify_partition
from varlin.linearize.constants import (
    GrowthConstants,
    WindowGrowth,
    constants_for_model,
    find_separation,
    growth_constants,
    window_growth_check,
)
from varlin.linearize.sequence import SequencePartition, sequence_partition

__all__ = [
    "BetaEstimate",
    "analytic_beta",
    "block_window_maxima",
    "estimate_beta",
    "first_mixing_lag",
    "BlockPartition",
    "CertificationReport",
    "Check",
    "greedy_blocks",
    "partition_blocks",
    "verify_partition",
    "GrowthConstants",
    "WindowGrowth",
    "constants_for_model",
    "find_separation",
    "growth_constants",
    "window_growth_check",
    "SequencePartition",
    "sequence_partition",
]
