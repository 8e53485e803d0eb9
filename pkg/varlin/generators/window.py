"""Local-window functionals of a finite-state chain."""

import logging
from collections.abc import Callable

import numpy as np

from varlin.config.tolerance import get_config
from varlin.errors import ResourceBudgetError, UnsupportedModelError, ValidationError
from varlin.generators.model import (
    ArrayModel,
    ModelKind,
    WindowSpec,
    centered_shifts,
    infer_lattice,
    validate_model,
    window_initial_law,
)

logger = logging.getLogger(__name__)

WindowFunctional = Callable[[np.ndarray], np.ndarray]

WINDOW_FUNCTIONALS: dict[str, WindowFunctional] = {
    "sum": lambda vals: vals.sum(axis=1),
    "center": lambda vals: vals[:, vals.shape[1] // 2],
    "product": lambda vals: vals.prod(axis=1),
}


def list_window_functionals() -> list[str]:
    """Names accepted as the ``functional`` argument of :func:`local_window_array`."""
    return list(WINDOW_FUNCTIONALS.keys())


def tuple_digits(n_base_states: int, width: int) -> np.ndarray:
    """Digits ``(X_0..X_{width-1})`` of every tuple index, most significant first."""
    size = n_base_states**width
    return np.stack(np.unravel_index(np.arange(size), (n_base_states,) * width), axis=1)


def local_window_array(
    base: ArrayModel,
    half_width: int,
    functional: str | WindowFunctional = "sum",
    model_id: str | None = None,
) -> ArrayModel:
    """
    Array ``xi_j = f(X_j, ..., X_{j+2m})`` of raw base values over a window.

    The result is a first-order chain on ``(2m+1)``-tuples of base states, so
    the array is a Markov chain with memory ``2m`` in the base states. Row size
    shrinks to ``base.n - 2m``.

    Args:
        base: IID or INHOM_MARKOV model.
        half_width: Window half-width ``m >= 0``.
        functional: Name in :data:`WINDOW_FUNCTIONALS` or a callable mapping an
            array of shape ``(tuples, 2m+1)`` of raw base values to one value per tuple.
        model_id: Identifier used in reports.

    Raises:
        UnsupportedModelError: Base is not a finite-state chain.
        ResourceBudgetError: ``|S|^(2m+1)`` exceeds the window-state budget.
    """
    if base.kind not in (ModelKind.IID_LATTICE, ModelKind.INHOM_MARKOV):
        raise UnsupportedModelError("Local windows need a finite-state chain as base")
    if half_width < 0:
        raise ValidationError("Window half-width must be non-negative")
    width = 2 * half_width + 1
    n = base.n - 2 * half_width
    if n < 1:
        raise ValidationError(f"Base row of size {base.n} is too short for window {half_width}")
    sb = base.n_states
    size = sb**width
    budget = get_config().budget.window_states
    if size > budget:
        raise ResourceBudgetError(f"Window state space {sb}^{width} = {size} exceeds budget {budget}")
    if isinstance(functional, str):
        if functional not in WINDOW_FUNCTIONALS:
            raise ValidationError(f"Unknown window functional: {functional}")
        name, func = functional, WINDOW_FUNCTIONALS[functional]
    else:
        name, func = getattr(functional, "__name__", "custom"), functional

    digits = tuple_digits(sb, width)
    base_raw = base.lattice_offset + base.step * base.codes
    raw = np.empty((n, size))
    for j in range(n):
        window_vals = base_raw[j + np.arange(width)[None, :], digits]
        raw[j] = func(window_vals)
    offset, step, codes = infer_lattice(raw)

    spec = WindowSpec(half_width=half_width, functional=name, base=base)
    model_id = model_id or f"{base.model_id}-w{half_width}"
    draft = ArrayModel(
        kind=ModelKind.LOCAL_WINDOW,
        model_id=model_id,
        n=n,
        initial_law=window_initial_law(base, width),
        codes=codes,
        lattice_offset=float(offset),
        step=float(step),
        shifts=np.zeros(n),
        memory=2 * half_width,
        window=spec,
    )
    shifts = centered_shifts(draft.marginals[1:], float(offset), float(step), codes)
    model = ArrayModel(
        kind=ModelKind.LOCAL_WINDOW,
        model_id=model_id,
        n=n,
        initial_law=draft.initial_law,
        codes=codes,
        lattice_offset=float(offset),
        step=float(step),
        shifts=shifts,
        memory=2 * half_width,
        window=spec,
        metadata={"half_width": half_width, "functional": name},
    )
    logger.debug("Window model %s: %d tuple states, step %s", model_id, size, step)
    return validate_model(model)


__all__ = [
    "WINDOW_FUNCTIONALS",
    "list_window_functionals",
    "tuple_digits",
    "local_window_array",
]
