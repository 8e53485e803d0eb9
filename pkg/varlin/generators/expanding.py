"""Sequential full-branch expanding maps ``x -> k_j x mod 1``.

Orbits are drawn through their digit expansion: under Lebesgue measure the
digits ``d_j = floor(k_j x_j)`` are independent and uniform, and
``x_j = (d_j + x_{j+1}) / k_j``. Building the orbit backwards from a uniform
tail keeps every ``x_j`` at full double precision.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from varlin.config.tolerance import get_config
from varlin.errors import ResourceBudgetError, UnsupportedModelError, ValidationError
from varlin.generators.model import ArrayModel, ExpandingSpec, ModelKind

logger = logging.getLogger(__name__)

# Cylinders narrower than this are averaged by their midpoint value.
_MIDPOINT_WIDTH = 1e-12


def _holder_mean(exponent: float) -> float:
    return 0.5**exponent / (exponent + 1)


def observable(spec: ExpandingSpec, x: np.ndarray) -> np.ndarray:
    """Centered observable ``h(x)`` (Lebesgue mean zero), before amplitudes."""
    if spec.observable == "cosine":
        return np.cos(2 * math.pi * x)
    if spec.observable == "holder":
        return np.abs(x - 0.5) ** spec.exponent - _holder_mean(spec.exponent)
    return np.zeros_like(x)


def _antiderivative(spec: ExpandingSpec, x: np.ndarray) -> np.ndarray:
    if spec.observable == "cosine":
        return np.sin(2 * math.pi * x) / (2 * math.pi)
    if spec.observable == "holder":
        t = spec.exponent
        u = x - 0.5
        return np.sign(u) * np.abs(u) ** (t + 1) / (t + 1) - _holder_mean(t) * x
    return np.zeros_like(x)


def cylinder_average(spec: ExpandingSpec, left: np.ndarray, width: np.ndarray) -> np.ndarray:
    """Lebesgue average of ``h`` over ``[left, left + width]``."""
    left = np.asarray(left, dtype=float)
    width = np.broadcast_to(np.asarray(width, dtype=float), left.shape)
    wide = width >= _MIDPOINT_WIDTH
    out = observable(spec, left + width / 2)
    if np.any(wide):
        lw = left[wide]
        ww = width[wide]
        out[wide] = (_antiderivative(spec, lw + ww) - _antiderivative(spec, lw)) / ww
    return out


def _amplitudes(model: ArrayModel) -> np.ndarray:
    spec = model.expanding
    if spec.amplitudes is None:
        return np.ones(model.n)
    return np.asarray(spec.amplitudes, dtype=float)


def check_orbit_budget(n: int) -> None:
    """Raise ResourceBudgetError for orbits longer than the configured cap."""
    cap = get_config().budget.orbit_length
    if n > cap:
        raise ResourceBudgetError(f"Orbit length {n} exceeds budget {cap}")


def _padded_slopes(spec: ExpandingSpec, n: int, extra: int) -> np.ndarray:
    slopes = np.asarray(spec.slopes, dtype=np.int64)[:n]
    return np.concatenate([slopes, np.full(extra, slopes[-1], dtype=np.int64)])


def draw_digits(model: ArrayModel, generators: list[np.random.Generator], n: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Draw digit expansions for a batch of replicates.

    Returns:
        ``(digits, tail)`` with digits of shape ``(R, n + padding)`` and one
        uniform tail per replicate.
    """
    check_orbit_budget(n)
    spec = model.expanding
    extra = max(spec.padding, spec.approx_window or 0)
    slopes = _padded_slopes(spec, n, extra)
    uniforms = np.stack([g.random(n + extra + 1) for g in generators])
    digits = np.minimum(np.floor(uniforms[:, :-1] * slopes), slopes - 1).astype(np.int64)
    return digits, uniforms[:, -1]


def orbit_from_digits(spec: ExpandingSpec, digits: np.ndarray, tail: np.ndarray, n: int) -> np.ndarray:
    """Orbit points ``x_1..x_n`` from digits and the uniform tail."""
    total = digits.shape[1]
    slopes = _padded_slopes(spec, n, total - n)
    x = tail.copy()
    orbit = np.empty((digits.shape[0], n))
    for j in range(total - 1, -1, -1):
        x = (digits[:, j] + x) / slopes[j]
        if j < n:
            orbit[:, j] = x
    return orbit


def approximant_values(model: ArrayModel, digits: np.ndarray, n: int, r: int) -> np.ndarray:
    """Conditional expectation of ``xi_j`` on its cylinder of ``r`` digits."""
    spec = model.expanding
    slopes = _padded_slopes(spec, n, digits.shape[1] - n).astype(float)
    left = np.zeros((digits.shape[0], n))
    scale = np.ones(n)
    for i in range(r):
        scale = scale / slopes[i : i + n]
        left += digits[:, i : i + n] * scale
    return _amplitudes(model)[:n] * cylinder_average(spec, left, scale)


def expanding_values(model: ArrayModel, digits: np.ndarray, tail: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Values (exact or approximant) and orbit points for sampled digits."""
    check_orbit_budget(n)
    spec = model.expanding
    orbit = orbit_from_digits(spec, digits, tail, n)
    r = spec.approx_window
    if r is None or r >= model.n:
        values = _amplitudes(model)[:n] * observable(spec, orbit)
    else:
        values = approximant_values(model, digits, n, r)
    return values, orbit


@dataclass(frozen=True)
class WindowApproximation:
    """Approximant model with its estimated ``beta_p(r)``."""

    model: ArrayModel
    r: int
    p: float
    beta: float
    standard_error: float


def window_approximation(
    model: ArrayModel,
    r: int,
    p: float = 2.0,
    replicates: int = 10_000,
    seed: int = 0,
) -> WindowApproximation:
    """
    Replace each ``xi_j`` by its conditional expectation on ``r``-digit cylinders.

    Args:
        model: Sequential expanding model.
        r: Cylinder depth (approximation window), ``r >= 1``.
        p: Norm index of ``beta_p(r) = sup_j ||xi_j - xi_{j,r}||_p``.
        replicates: Sampled orbits used for the estimate.
        seed: Master seed of the orbit streams.

    Returns:
        The approximant model and the Monte Carlo estimate of ``beta_p(r)``.
    """
    from varlin.generators.sampling import replicate_generator

    if model.kind != ModelKind.SEQUENTIAL_EXPANDING:
        raise UnsupportedModelError("Window approximation needs a sequential expanding model")
    if r < 1:
        raise ValidationError("Approximation window must be at least 1")
    approx = replace(model, model_id=f"{model.model_id}-r{r}", expanding=replace(model.expanding, approx_window=r))
    if r >= model.n:
        return WindowApproximation(approx, r, p, 0.0, 0.0)
    exact_spec = replace(model.expanding, approx_window=None, padding=max(model.expanding.padding, r))
    exact = replace(model, expanding=exact_spec)
    gens = [replicate_generator(seed, i) for i in range(replicates)]
    digits, tail = draw_digits(exact, gens, model.n)
    values, _ = expanding_values(exact, digits, tail, model.n)
    approx_vals = approximant_values(model, digits, model.n, r)
    powered = np.abs(values - approx_vals) ** p
    moments = powered.mean(axis=0)
    j = int(np.argmax(moments))
    beta = float(moments[j] ** (1 / p))
    if beta > 0:
        se_moment = powered[:, j].std(ddof=1) / math.sqrt(replicates)
        se = float(se_moment * moments[j] ** (1 / p - 1) / p)
    else:
        se = 0.0
    logger.debug("beta_%s(%d) = %.4e +- %.1e at index %d", p, r, beta, se, j + 1)
    return WindowApproximation(approx, r, p, beta, se)


__all__ = [
    "observable",
    "cylinder_average",
    "draw_digits",
    "orbit_from_digits",
    "approximant_values",
    "expanding_values",
    "WindowApproximation",
    "window_approximation",
]
