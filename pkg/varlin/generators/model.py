"""Triangular-array model definitions.

A finite-state row is a chain ``zeta_0, zeta_1, ..., zeta_n`` with initial law
on ``zeta_0`` and transition matrices ``P_1..P_n`` (``P_j`` moves ``zeta_{j-1}``
to ``zeta_j``). The array value is ``xi_j = g_j(zeta_j)`` for ``j = 1..n``,
stored as integer lattice codes plus a per-index shift that centers the value.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import cached_property, reduce
from math import gcd

import numpy as np

from varlin.config.tolerance import get_config
from varlin.errors import ResourceBudgetError, UnsupportedModelError, ValidationError

logger = logging.getLogger(__name__)


class ModelKind(Enum):
    """Kind of triangular array."""

    IID_LATTICE = "iid"
    INHOM_MARKOV = "markov"
    LOCAL_WINDOW = "window"
    SEQUENTIAL_EXPANDING = "expanding"


FINITE_KINDS = (ModelKind.IID_LATTICE, ModelKind.INHOM_MARKOV, ModelKind.LOCAL_WINDOW)


@dataclass(frozen=True, eq=False)
class WindowSpec:
    """Dependence window of a local-window array.

    Each tuple state ``(X_j, ..., X_{j+2m})`` is encoded in base ``|S_base|``
    with ``X_j`` as the most significant digit.
    """

    half_width: int
    functional: str
    base: "ArrayModel"

    @property
    def width(self) -> int:
        return 2 * self.half_width + 1


@dataclass(frozen=True, eq=False)
class ExpandingSpec:
    """Sequential piecewise expanding maps ``T_j(x) = k_j x mod 1``.

    Attributes:
        slopes: Integer slopes ``k_j >= 2`` for ``j = 1..n``.
        observable: 'cosine', 'holder' or 'constant'.
        exponent: Hoelder exponent of the 'holder' observable.
        amplitudes: Per-index multipliers of the observable.
        approx_window: Cylinder depth ``r`` of the approximant, or None for
            the exact observable.
        padding: Extra digits drawn past index ``n`` before the uniform tail.
    """

    slopes: np.ndarray
    observable: str = "cosine"
    exponent: float = 0.5
    amplitudes: np.ndarray | None = None
    approx_window: int | None = None
    padding: int = 60


@dataclass(frozen=True, eq=False)
class ArrayModel:
    """
    Generative description of one row ``{xi_{j,n}}`` of a triangular array.

    Finite-state kinds store ``initial_law`` (law of ``zeta_0``), a stack of
    transition matrices and lattice codes; values are
    ``xi_j(s) = shifts[j-1] + step * codes[j-1, s]``. Window models keep no
    dense transitions: propagation runs on the base chain. Expanding models
    carry only their :class:`ExpandingSpec`.

    Use :func:`validate_model` (called by every builder) before sampling.
    """

    kind: ModelKind
    model_id: str
    n: int
    initial_law: np.ndarray | None = None
    transitions: np.ndarray | None = None
    codes: np.ndarray | None = None
    lattice_offset: float = 0.0
    step: float = 1.0
    shifts: np.ndarray | None = None
    memory: int | None = None
    window: WindowSpec | None = None
    expanding: ExpandingSpec | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def is_finite(self) -> bool:
        return self.kind in FINITE_KINDS

    @property
    def n_states(self) -> int:
        if self.window is not None:
            return self.window.base.n_states**self.window.width
        if self.initial_law is None:
            raise UnsupportedModelError(f"Model {self.model_id} has no finite state space")
        return int(self.initial_law.shape[0])

    def require_finite(self) -> None:
        if not self.is_finite:
            raise UnsupportedModelError(
                f"Operation requires a finite-state model, got {self.kind.value}"
            )

    def push(self, j: int, mass: np.ndarray) -> np.ndarray:
        """Push a (signed) mass on ``zeta_{j-1}`` forward to ``zeta_j``.

        ``mass`` has the state axis first and any trailing axes.
        """
        if self.window is not None:
            return self._window_push(j, mass)
        return np.tensordot(self.transitions[j - 1], mass, axes=([0], [0]))

    def pull(self, j: int, values: np.ndarray) -> np.ndarray:
        """Conditional expectation ``E[values(zeta_j) | zeta_{j-1} = s]``."""
        if self.window is not None:
            return self._window_pull(j, values)
        return np.tensordot(self.transitions[j - 1], values, axes=([1], [0]))

    def step_matrix(self, j: int) -> np.ndarray:
        """Dense transition matrix ``P_j`` (1-based)."""
        if not 1 <= j <= self.n:
            raise ValidationError("Transition index out of range", index=j)
        if self.window is None:
            self.require_finite()
            return np.asarray(self.transitions[j - 1])
        size = self.n_states
        if size > get_config().budget.window_states:
            raise ResourceBudgetError(f"Dense window transitions need {size} states")
        return self._window_push(j, np.eye(size))

    def _window_push(self, j: int, mass: np.ndarray) -> np.ndarray:
        base = self.window.base
        w = self.window.width
        sb = base.n_states
        p = base.transitions[j + w - 2]
        rest = mass.shape[1:]
        if w == 1:
            return np.tensordot(p, mass, axes=([0], [0]))
        dropped = mass.reshape((sb, sb ** (w - 1)) + rest).sum(axis=0)
        dropped = dropped.reshape((sb ** (w - 2), sb) + rest)
        pad = (None,) * len(rest)
        out = dropped[:, :, None, ...] * p[(None, slice(None), slice(None)) + pad]
        return out.reshape((sb**w,) + rest)

    def _window_pull(self, j: int, values: np.ndarray) -> np.ndarray:
        base = self.window.base
        w = self.window.width
        sb = base.n_states
        p = base.transitions[j + w - 2]
        rest = values.shape[1:]
        if w == 1:
            return np.tensordot(p, values, axes=([1], [0]))
        grid = values.reshape((sb ** (w - 2), sb, sb) + rest)
        pad = (None,) * len(rest)
        cond = (grid * p[(None, slice(None), slice(None)) + pad]).sum(axis=2)
        cond = cond.reshape((sb ** (w - 1),) + rest)
        return np.broadcast_to(cond[None], (sb,) + cond.shape).reshape((sb**w,) + rest)

    @cached_property
    def marginals(self) -> np.ndarray:
        """Exact laws of ``zeta_0..zeta_n``, shape ``(n + 1, |S|)``."""
        self.require_finite()
        out = np.empty((self.n + 1, self.n_states))
        out[0] = self.initial_law
        for j in range(1, self.n + 1):
            out[j] = self.push(j, out[j - 1])
        return out

    @cached_property
    def observables(self) -> np.ndarray:
        """Centered values ``g_j(s)``, shape ``(n, |S|)`` (row ``j-1`` is ``xi_j``)."""
        self.require_finite()
        return self.shifts[:, None] + self.step * self.codes

    def with_id(self, model_id: str) -> "ArrayModel":
        return replace(self, model_id=model_id)


def window_initial_law(base: ArrayModel, width: int) -> np.ndarray:
    """Law of the tuple ``(X_0, ..., X_{width-1})`` of a base chain."""
    law = np.asarray(base.initial_law, dtype=float)
    sb = base.n_states
    for t in range(1, width):
        p = base.transitions[t - 1]
        law = (law.reshape(-1, sb)[:, :, None] * p[None]).reshape(-1)
    return law


def _fraction_gcd(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(
        gcd(a.numerator * b.denominator, b.numerator * a.denominator),
        a.denominator * b.denominator,
    )


def infer_lattice(values: np.ndarray, tol: float | None = None) -> tuple[Fraction, Fraction, np.ndarray]:
    """
    Snap raw observable values to a common rational lattice.

    Args:
        values: Raw (uncentered) values, any shape.
        tol: Largest tolerated snapping distance.

    Returns:
        ``(offset, step, codes)`` with ``values ~= offset + step * codes``.

    Raises:
        ValidationError: A value is not representable on a rational lattice.
    """
    tol = get_config().tolerance.lattice_snap if tol is None else tol
    values = np.asarray(values, dtype=float)
    unique = np.unique(values)
    rationals = [Fraction(float(v)).limit_denominator(10**6) for v in unique]
    for v, r in zip(unique, rationals):
        if abs(float(r) - v) > tol:
            raise ValidationError(f"Value {v!r} is not on a rational lattice")
    offset = rationals[0]
    diffs = [r - offset for r in rationals[1:]]
    step = reduce(_fraction_gcd, diffs) if diffs else Fraction(1)
    codes = np.rint((values - float(offset)) / float(step)).astype(np.int64)
    snapped = float(offset) + float(step) * codes
    if values.size and np.max(np.abs(snapped - values)) > tol:
        raise ValidationError("Observable values could not be snapped to the lattice")
    return offset, step, codes


def centered_shifts(marginals: np.ndarray, offset: float, step: float, codes: np.ndarray) -> np.ndarray:
    """Shifts ``offset - E[raw_j]`` under the exact marginals of ``zeta_1..zeta_n``."""
    raw_means = offset + step * np.einsum("js,js->j", marginals, codes)
    return offset - raw_means


def validate_model(model: ArrayModel) -> ArrayModel:
    """
    Check stochasticity, lattice codes and centering of a model.

    Returns:
        The model itself, for chaining.

    Raises:
        ValidationError: Naming the offending index.
    """
    tol = get_config().tolerance
    if model.n < 1:
        raise ValidationError("Row size must be at least 1")
    if model.kind == ModelKind.SEQUENTIAL_EXPANDING:
        spec = model.expanding
        if spec is None:
            raise ValidationError("Expanding model without map parameters")
        slopes = np.asarray(spec.slopes)
        if slopes.shape != (model.n,):
            raise ValidationError("Expanding model needs one slope per index")
        bad = np.flatnonzero((slopes < 2) | (slopes != np.rint(slopes)))
        if bad.size:
            raise ValidationError("Map is not expanding (integer slope >= 2 required)", index=int(bad[0]) + 1)
        if spec.observable not in ("cosine", "holder", "constant"):
            raise ValidationError(f"Unknown observable: {spec.observable}")
        if spec.observable == "holder" and not 0 < spec.exponent <= 1:
            raise ValidationError("Hoelder exponent must lie in (0, 1]")
        if spec.approx_window is not None and spec.approx_window < 1:
            raise ValidationError("Approximation window must be at least 1")
        return model

    law = np.asarray(model.initial_law, dtype=float)
    if law.ndim != 1 or np.any(law < 0) or abs(law.sum() - 1) > tol.row_sum:
        raise ValidationError("Initial law is not a probability vector", index=0)
    if model.window is not None:
        validate_model(model.window.base)
    else:
        trans = np.asarray(model.transitions, dtype=float)
        if trans.shape != (model.n, law.size, law.size):
            raise ValidationError(f"Expected {model.n} transition matrices of size {law.size}")
        negative = np.flatnonzero((trans < 0).any(axis=(1, 2)))
        if negative.size:
            raise ValidationError("Negative transition probability", index=int(negative[0]) + 1)
        row_err = np.abs(trans.sum(axis=2) - 1).max(axis=1)
        bad = np.flatnonzero(row_err > tol.row_sum)
        if bad.size:
            raise ValidationError("Transition row does not sum to 1", index=int(bad[0]) + 1)
    if model.codes.shape != (model.n, model.n_states):
        raise ValidationError("Observable table has the wrong shape")
    means = np.einsum("js,js->j", model.marginals[1:], model.observables)
    off = np.flatnonzero(np.abs(means) > tol.centering)
    if off.size:
        raise ValidationError(
            f"Observable is not centered (mean {means[off[0]]:.3e})", index=int(off[0]) + 1
        )
    return model


def finite_model(
    kind: ModelKind,
    model_id: str,
    initial_law: np.ndarray,
    transitions: np.ndarray,
    raw_values: np.ndarray,
    memory: int | None = 0,
    metadata: dict | None = None,
) -> ArrayModel:
    """
    Assemble and validate a finite-state model from raw observable tables.

    Args:
        kind: IID_LATTICE or INHOM_MARKOV.
        model_id: Identifier used in reports.
        initial_law: Law of ``zeta_0``.
        transitions: Stack ``(n, |S|, |S|)`` of ``P_1..P_n``.
        raw_values: Uncentered ``g_j(s)`` on a rational lattice, ``(n, |S|)``.
        memory: Declared memory of the process.
        metadata: Free-form build parameters recorded in reports.
    """
    initial_law = np.asarray(initial_law, dtype=float)
    transitions = np.asarray(transitions, dtype=float)
    n = transitions.shape[0]
    offset, step, codes = infer_lattice(raw_values)
    draft = ArrayModel(
        kind=kind,
        model_id=model_id,
        n=n,
        initial_law=initial_law,
        transitions=transitions,
        codes=codes,
        lattice_offset=float(offset),
        step=float(step),
        shifts=np.zeros(n),
        memory=memory,
        metadata=dict(metadata or {}),
    )
    shifts = centered_shifts(draft.marginals[1:], float(offset), float(step), codes)
    model = ArrayModel(
        kind=kind,
        model_id=model_id,
        n=n,
        initial_law=initial_law,
        transitions=transitions,
        codes=codes,
        lattice_offset=float(offset),
        step=float(step),
        shifts=shifts,
        memory=memory,
        metadata=dict(metadata or {}),
    )
    logger.debug("Built %s model %s: n=%d, |S|=%d, step=%s", kind.value, model_id, n, initial_law.size, step)
    return validate_model(model)


__all__ = [
    "ModelKind",
    "FINITE_KINDS",
    "WindowSpec",
    "ExpandingSpec",
    "ArrayModel",
    "infer_lattice",
    "centered_shifts",
    "validate_model",
    "finite_model",
    "window_initial_law",
]
