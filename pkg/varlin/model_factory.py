"""Model factory for building reference arrays by name."""

import math
from enum import Enum
from typing import Any

from varlin.config.reference import REFERENCE_DEFAULTS
from varlin.errors import UsageError
from varlin.generators.model import ArrayModel


class ReferenceModel(Enum):
    """Named reference arrays."""

    IID = "iid"
    ELLIPTIC_CHAIN = "elliptic_chain"
    GEOMETRIC_CHAIN = "geometric_chain"
    SLOW_VARIANCE = "slow_variance"
    MEMORY_MARKOV = "memory_markov"
    LOCAL_WINDOW = "local_window"
    DOUBLING = "doubling"


def window_half_width(n: int) -> int:
    """Half-width ``ceil(log2(n) / 4)`` used by the reference window array."""
    return max(1, math.ceil(math.log2(max(n, 2)) / 4))


class ModelFactory:
    """
    Factory class for building reference models of a given row size.

    The builder module is imported on first use.
    """

    def __init__(self, reference: ReferenceModel = ReferenceModel.IID):
        """
        Initialize the model factory.

        Args:
            reference: Which reference model to build.
        """
        self.reference = reference
        self._module = None

    @property
    def module(self):
        """Get the builder module."""
        if self._module is None:
            from varlin.generators import builders

            self._module = builders
        return self._module

    def build(self, n: int, model_id: str | None = None, **params: Any) -> ArrayModel:
        """Build the reference model with ``n`` indices."""
        kwargs = {**REFERENCE_DEFAULTS[self.reference.value], **params}
        model_id = model_id or self.reference.value
        b = self.module
        if self.reference == ReferenceModel.IID:
            return b.build_iid_model(n, model_id=model_id, **kwargs)
        if self.reference == ReferenceModel.ELLIPTIC_CHAIN:
            return b.build_elliptic_chain(n, model_id=model_id, **kwargs)
        if self.reference == ReferenceModel.GEOMETRIC_CHAIN:
            return b.build_geometric_chain(n, model_id=model_id, **kwargs)
        if self.reference == ReferenceModel.SLOW_VARIANCE:
            return b.build_slow_variance_model(n=n, model_id=model_id, **kwargs)
        if self.reference == ReferenceModel.MEMORY_MARKOV:
            return b.build_memory_markov_model(n, model_id=model_id, **kwargs)
        if self.reference == ReferenceModel.LOCAL_WINDOW:
            from varlin.generators.window import local_window_array

            half_width = int(kwargs.pop("half_width", window_half_width(n)))
            base = b.build_iid_model(n + 2 * half_width, model_id=f"{model_id}-base")
            return local_window_array(base, half_width, kwargs.pop("functional", "sum"), model_id=model_id)
        if self.reference == ReferenceModel.DOUBLING:
            return b.build_doubling_model(n, model_id=model_id, **kwargs)
        raise ValueError(f"Unknown reference model: {self.reference}")


def build_reference_model(name: str, n: int, model_id: str | None = None, **params: Any) -> ArrayModel:
    """
    Build a reference model by catalog name.

    Raises:
        UsageError: Unknown name.
    """
    try:
        reference = ReferenceModel(name)
    except ValueError as e:
        raise UsageError(f"Unknown reference model: {name}") from e
    return ModelFactory(reference).build(n, model_id=model_id, **params)
