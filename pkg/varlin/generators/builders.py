"""Reference model builders."""

import logging
import math

import numpy as np
from scipy.stats import linregress

from varlin.errors import ConstructionError, ValidationError
from varlin.generators.model import ArrayModel, ExpandingSpec, ModelKind, finite_model, validate_model

logger = logging.getLogger(__name__)


def build_iid_model(
    n: int,
    values: tuple[float, ...] = (-1.0, 1.0),
    probs: tuple[float, ...] | None = None,
    model_id: str = "iid",
) -> ArrayModel:
    """
    Independent identically distributed lattice variables.

    Args:
        n: Row size.
        values: Support points (on a rational lattice).
        probs: Probabilities of the support points, uniform by default.
        model_id: Identifier used in reports.
    """
    vals = np.asarray(values, dtype=float)
    law = np.full(vals.size, 1 / vals.size) if probs is None else np.asarray(probs, dtype=float)
    if law.shape != vals.shape:
        raise ValidationError("values and probs must have the same length")
    transitions = np.broadcast_to(law, (n, law.size, law.size))
    raw = np.broadcast_to(vals, (n, vals.size))
    return finite_model(ModelKind.IID_LATTICE, model_id, law, transitions, raw, memory=0)


def build_chain_model(
    transitions: np.ndarray,
    values: np.ndarray,
    initial_law: np.ndarray | None = None,
    n: int | None = None,
    model_id: str = "chain",
    memory: int = 0,
) -> ArrayModel:
    """
    General finite-state chain with a lattice observable.

    Args:
        transitions: One ``(|S|, |S|)`` matrix (homogeneous, needs ``n``) or a
            stack ``(n, |S|, |S|)`` of ``P_1..P_n``.
        values: Raw observable, ``(|S|,)`` shared by all indices or ``(n, |S|)``.
        initial_law: Law of ``zeta_0``, uniform by default.
        n: Row size when ``transitions`` is a single matrix.
        model_id: Identifier used in reports.
        memory: Declared memory of the process.
    """
    trans = np.asarray(transitions, dtype=float)
    if trans.ndim == 2:
        if n is None:
            raise ValidationError("Row size is required for a homogeneous chain")
        trans = np.broadcast_to(trans, (n,) + trans.shape)
    n = trans.shape[0]
    size = trans.shape[1]
    law = np.full(size, 1 / size) if initial_law is None else np.asarray(initial_law, dtype=float)
    vals = np.asarray(values, dtype=float)
    raw = np.broadcast_to(vals, (n, size)) if vals.ndim == 1 else vals
    return finite_model(ModelKind.INHOM_MARKOV, model_id, law, trans, raw, memory=memory)


def stationary_law(matrix: np.ndarray) -> np.ndarray:
    """Stationary law of an irreducible stochastic matrix."""
    size = matrix.shape[0]
    system = np.vstack([matrix.T - np.eye(size), np.ones(size)])
    rhs = np.zeros(size + 1)
    rhs[-1] = 1.0
    law, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    law = np.clip(law, 0.0, None)
    return law / law.sum()


def build_elliptic_chain(n: int, spread: float = 0.05, model_id: str = "elliptic") -> ArrayModel:
    """
    Time-varying uniformly elliptic two-state chain with values ``-1, +1``.

    Switching probabilities oscillate around 0.45 with the given spread, so
    every entry stays in ``[0.4, 0.6]`` for the default spread.
    """
    j = np.arange(1, n + 1)
    a = 0.45 + spread * np.sin(2 * math.pi * j / 97)
    b = 0.45 + spread * np.cos(2 * math.pi * j / 89)
    trans = np.empty((n, 2, 2))
    trans[:, 0, 0] = 1 - a
    trans[:, 0, 1] = a
    trans[:, 1, 0] = b
    trans[:, 1, 1] = 1 - b
    model = build_chain_model(trans, np.array([-1.0, 1.0]), initial_law=np.array([0.5, 0.5]), model_id=model_id)
    model.metadata.update({"spread": spread})
    return model


def build_geometric_chain(n: int, delta: float = 0.5, model_id: str = "geometric") -> ArrayModel:
    """Stationary symmetric two-state chain whose Dobrushin coefficient is ``delta``."""
    stay = (1 + delta) / 2
    matrix = np.array([[stay, 1 - stay], [1 - stay, stay]])
    model = build_chain_model(matrix, np.array([-1.0, 1.0]), initial_law=np.array([0.5, 0.5]), n=n, model_id=model_id)
    model.metadata.update({"delta": delta})
    return model


def build_memory_markov_model(
    n: int,
    memory: int = 3,
    strength: float = 0.4,
    model_id: str = "memory",
) -> ArrayModel:
    """
    Binary process with memory ``m``, encoded as a first-order chain on ``m``-tuples.

    The next bit is 1 with probability ``1/2 + strength * (mean of last m bits - 1/2)``.
    State ``s`` stores the most recent bit in its least significant binary digit;
    the observable is ``2 * bit - 1``. The chain starts from its stationary law.
    """
    if memory < 1:
        raise ValidationError("Memory must be at least 1")
    if not 0 <= strength < 1:
        raise ValidationError("strength must lie in [0, 1)")
    size = 2**memory
    states = np.arange(size)
    bits = (states[:, None] >> np.arange(memory)[None, :]) & 1
    p_one = 0.5 + strength * (bits.mean(axis=1) - 0.5)
    matrix = np.zeros((size, size))
    shifted = (states << 1) & (size - 1)
    matrix[states, shifted] = 1 - p_one
    matrix[states, shifted | 1] = p_one
    law = stationary_law(matrix)
    model = build_chain_model(
        matrix, 2.0 * (states & 1) - 1.0, initial_law=law, n=n, model_id=model_id, memory=memory
    )
    model.metadata.update({"memory": memory, "strength": strength})
    return model


def signal_positions(gamma: float, n: int, intensity: float = 8.0) -> np.ndarray:
    """Indices ``ceil((k / intensity)^(1/gamma))`` inside ``1..n``; about ``intensity * n^gamma`` of them."""
    k_max = int(math.ceil(intensity * n**gamma)) + 1
    k = np.arange(1, k_max + 1)
    positions = np.unique(np.ceil((k / intensity) ** (1 / gamma)).astype(np.int64))
    return positions[(positions >= 1) & (positions <= n)]


def fitted_variance_exponent(model: ArrayModel) -> float:
    """Slope of ``log Var(S_m)`` against ``log m`` over ``m`` in ``[n/16, n]``."""
    from varlin.oracle.variance import ExactVarianceOracle

    n = model.n
    lo = max(1, n // 16)
    profile = ExactVarianceOracle(model).prefix_variances()
    m = np.arange(lo, n + 1)
    fit = linregress(np.log(m), np.log(profile[lo:]))
    return float(fit.slope)


def build_slow_variance_model(
    gamma: float,
    n: int,
    intensity: float = 8.0,
    tolerance: float = 0.15,
    check: bool = True,
    model_id: str | None = None,
) -> ArrayModel:
    """
    Chain whose partial-sum variance grows like ``n^gamma``.

    The state is the pair ``(x_{j-1}, x_j)`` of fair bits. The observable is the
    coboundary ``x_j - x_{j-1}`` plus a sparse signal ``2 x_j - 1`` on
    :func:`signal_positions`.

    Args:
        gamma: Target exponent in ``(0, 1]``.
        n: Row size.
        intensity: Signal positions per unit of ``n^gamma``.
        tolerance: Accepted distance between fitted and target exponent.
        check: Fit the exponent on the exact variance profile.
        model_id: Identifier used in reports.

    Raises:
        ValidationError: gamma outside ``(0, 1]``.
        ConstructionError: Fitted exponent out of tolerance.
    """
    if not 0 < gamma <= 1:
        raise ValidationError(f"gamma must lie in (0, 1], got {gamma}")
    model_id = model_id or f"slow-{gamma:g}"
    pair_prev = np.array([0, 0, 1, 1])
    pair_cur = np.array([0, 1, 0, 1])
    matrix = np.zeros((4, 4))
    for s in range(4):
        for c in (0, 1):
            matrix[s, 2 * pair_cur[s] + c] = 0.5
    signal = np.zeros(n)
    signal[signal_positions(gamma, n, intensity) - 1] = 1.0
    raw = (pair_cur - pair_prev)[None, :] + signal[:, None] * (2 * pair_cur - 1)[None, :]
    model = build_chain_model(matrix, raw, initial_law=np.full(4, 0.25), n=n, model_id=model_id)
    model.metadata.update({"gamma": gamma, "intensity": intensity})
    if check:
        exponent = fitted_variance_exponent(model)
        model.metadata["fitted_exponent"] = exponent
        logger.debug("Slow-variance model gamma=%g: fitted exponent %.4f", gamma, exponent)
        if abs(exponent - gamma) > tolerance:
            raise ConstructionError(
                "slow_variance_exponent",
                f"fitted exponent {exponent:.4f} is not within {tolerance} of gamma={gamma}",
            )
    return model


def build_doubling_model(
    n: int,
    slopes: int | list[int] = 2,
    observable: str = "cosine",
    exponent: float = 0.5,
    amplitude: float = 1.0,
    model_id: str = "doubling",
) -> ArrayModel:
    """
    Sequential expanding maps ``x -> k_j x mod 1`` with a smooth or Hoelder observable.

    Args:
        n: Row size.
        slopes: One integer slope for all maps or one per index.
        observable: 'cosine', 'holder' or 'constant'.
        exponent: Hoelder exponent for the 'holder' observable.
        amplitude: Observable multiplier.
        model_id: Identifier used in reports.
    """
    k = np.full(n, slopes, dtype=np.int64) if np.isscalar(slopes) else np.asarray(slopes, dtype=np.int64)
    spec = ExpandingSpec(
        slopes=k,
        observable=observable,
        exponent=exponent,
        amplitudes=np.full(n, float(amplitude)),
    )
    model = ArrayModel(kind=ModelKind.SEQUENTIAL_EXPANDING, model_id=model_id, n=n, expanding=spec, memory=None)
    return validate_model(model)


__all__ = [
    "build_iid_model",
    "build_chain_model",
    "stationary_law",
    "build_elliptic_chain",
    "build_geometric_chain",
    "build_memory_markov_model",
    "signal_positions",
    "fitted_variance_exponent",
    "build_slow_variance_model",
    "build_doubling_model",
]
