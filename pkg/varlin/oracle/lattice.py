"""Exact partial-sum laws on a value lattice."""

import csv
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from varlin.config.tolerance import get_config
from varlin.errors import DomainError, ResourceBudgetError, ValidationError
from varlin.generators.model import ArrayModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LatticePmf:
    """Probability mass function on ``{offset + k * step : k = 0..len(weights)-1}``."""

    offset: float
    step: float
    weights: np.ndarray

    def __post_init__(self):
        tol = get_config().tolerance.mass
        if self.step <= 0:
            raise ValidationError("Lattice step must be positive")
        if np.any(self.weights < 0):
            raise ValidationError("Negative probability in lattice pmf")
        if abs(self.mass - 1) > tol:
            raise ValidationError(f"Lattice pmf mass {self.mass!r} differs from 1")

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def values(self) -> np.ndarray:
        return self.offset + self.step * np.arange(self.weights.size)

    @property
    def support(self) -> np.ndarray:
        return self.values[self.weights > 0]

    def mean(self) -> float:
        return math.fsum(self.weights * self.values)

    def rescale(self, factor: float) -> "LatticePmf":
        """Law of ``factor * S`` for ``factor != 0``."""
        if factor == 0:
            raise DomainError("Rescaling factor must be non-zero")
        if factor > 0:
            return LatticePmf(self.offset * factor, self.step * factor, self.weights)
        top = self.offset + self.step * (self.weights.size - 1)
        return LatticePmf(top * factor, -self.step * factor, self.weights[::-1].copy())

    def to_csv(self, path: str | Path) -> None:
        """Write rows ``value, probability``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["value", "probability"])
            for v, w in zip(self.values, self.weights):
                if w > 0:
                    writer.writerow([repr(float(v)), repr(float(w))])


def exact_sum_pmf(model: ArrayModel, a: int = 1, b: int | None = None) -> LatticePmf:
    """
    Exact law of ``sum_{j=a..b} xi_j`` by forward dynamic programming.

    The DP state is ``(zeta_j, accumulated lattice position)``; each step
    pushes the mass through ``P_j`` and shifts every row by its code.

    Args:
        model: Finite-state model.
        a: First index (1-based).
        b: Last index, defaults to ``n``.

    Raises:
        UnsupportedModelError: Not a finite-state model.
        ResourceBudgetError: Lattice wider than the configured budget.
    """
    model.require_finite()
    b = model.n if b is None else b
    if not 1 <= a <= b <= model.n:
        raise DomainError(f"Index range [{a}, {b}] outside 1..{model.n}")
    codes = model.codes[a - 1 : b]
    lo = codes.min(axis=1)
    spans = codes.max(axis=1) - lo
    width = int(spans.sum()) + 1
    budget = get_config().budget.lattice_points
    if width * model.n_states > budget:
        raise ResourceBudgetError(f"Lattice of {width} points x {model.n_states} states exceeds budget {budget}")

    size = model.n_states
    rel = codes - lo[:, None]
    cur_width = int(spans[0]) + 1
    mass = np.zeros((size, cur_width))
    mass[np.arange(size), rel[0]] = model.marginals[a]
    for j in range(a + 1, b + 1):
        moved = model.push(j, mass)
        row = rel[j - a]
        new_width = cur_width + int(spans[j - a])
        new = np.zeros((size, new_width))
        for code in np.unique(row):
            idx = row == code
            new[idx, code : code + cur_width] = moved[idx]
        mass, cur_width = new, new_width
    weights = np.clip(mass.sum(axis=0), 0.0, None)
    offset = math.fsum(model.shifts[a - 1 : b]) + model.step * float(lo.sum())
    logger.debug("Exact pmf of S[%d..%d] for %s: %d lattice points", a, b, model.model_id, weights.size)
    return LatticePmf(offset, model.step, weights)


class TailSide(Enum):
    """Which tail of the law to sum."""

    GE = ">="
    GT = ">"
    LE = "<="
    LT = "<"


@dataclass(frozen=True)
class TailProbability:
    probability: float
    log_probability: float


def _snap_index(pmf: LatticePmf, threshold: float) -> float:
    pos = (threshold - pmf.offset) / pmf.step
    near = round(pos)
    if abs(pos - near) <= get_config().tolerance.lattice_snap:
        return float(near)
    return pos


def tail_probability(pmf: LatticePmf, threshold: float, side: TailSide = TailSide.GE) -> TailProbability:
    """
    Exact tail probability of a lattice law.

    The log-tail is accumulated with ``logsumexp`` over log-weights, so tails
    far below the double-precision range of a plain sum stay accurate.

    Args:
        pmf: Lattice law.
        threshold: Threshold ``t``; lattice points within the snapping
            tolerance count as equal to ``t``.
        side: Which tail.
    """
    pos = _snap_index(pmf, threshold)
    k = np.arange(pmf.weights.size)
    if side == TailSide.GE:
        sel = k >= pos
    elif side == TailSide.GT:
        sel = k > pos
    elif side == TailSide.LE:
        sel = k <= pos
    else:
        sel = k < pos
    w = pmf.weights[sel & (pmf.weights > 0)]
    if w.size == 0:
        return TailProbability(0.0, -math.inf)
    log_p = float(logsumexp(np.log(w)))
    return TailProbability(min(1.0, math.fsum(w)), min(0.0, log_p))


__all__ = [
    "LatticePmf",
    "exact_sum_pmf",
    "TailSide",
    "TailProbability",
    "tail_probability",
]
