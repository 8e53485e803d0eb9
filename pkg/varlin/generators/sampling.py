"""Reproducible path sampling.

Replicate ``i`` of master seed ``s`` always draws from
``PCG64(SeedSequence(s, spawn_key=(i,)))``, so a replicate is bit-identical
whether it is sampled alone, in a batch, or in a parallel chunk.
"""

import csv
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from varlin.errors import ValidationError
from varlin.generators.expanding import check_orbit_budget, draw_digits, expanding_values
from varlin.generators.model import ArrayModel, ModelKind

logger = logging.getLogger(__name__)

DEFAULT_CHUNK = 256


def replicate_generator(seed: int, replicate: int) -> np.random.Generator:
    """Independent stream for one replicate of a master seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replicate,))))


@dataclass(frozen=True)
class SamplePath:
    """One sampled row: values ``xi_1..xi_n`` and the states that produced them.

    ``states`` holds ``zeta_0..zeta_n`` for finite-state models and the orbit
    points ``x_1..x_n`` for expanding maps.
    """

    values: np.ndarray
    states: np.ndarray
    seed: int
    replicate: int
    model_id: str


@dataclass(frozen=True)
class PathBatch:
    """A batch of replicates stacked along the first axis."""

    values: np.ndarray
    states: np.ndarray
    seed: int
    replicates: np.ndarray
    model_id: str

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def n(self) -> int:
        return int(self.values.shape[1])

    def path(self, i: int) -> SamplePath:
        return SamplePath(self.values[i], self.states[i], self.seed, int(self.replicates[i]), self.model_id)

    def to_csv(self, path: str | Path) -> None:
        """Write long-format rows ``replicate, j, xi``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["replicate", "j", "xi"])
            for rep, row in zip(self.replicates, self.values):
                for j, xi in enumerate(row, start=1):
                    writer.writerow([int(rep), j, repr(float(xi))])


def _inverse_cdf(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    states = (u[:, None] >= cdf_rows).sum(axis=1)
    return np.minimum(states, cdf_rows.shape[-1] - 1)


def _sample_chain_states(initial_law: np.ndarray, transitions: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    n = uniforms.shape[1] - 1
    cdf0 = np.cumsum(initial_law)
    states = np.empty(uniforms.shape, dtype=np.int64)
    states[:, 0] = _inverse_cdf(np.broadcast_to(cdf0, (uniforms.shape[0], cdf0.size)), uniforms[:, 0])
    for j in range(1, n + 1):
        cdf = np.cumsum(transitions[j - 1], axis=1)
        states[:, j] = _inverse_cdf(cdf[states[:, j - 1]], uniforms[:, j])
    return states


def _sample_chunk(model: ArrayModel, n: int, seed: int, replicates: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    gens = [replicate_generator(seed, int(r)) for r in replicates]
    if model.kind == ModelKind.SEQUENTIAL_EXPANDING:
        digits, tail = draw_digits(model, gens, n)
        return expanding_values(model, digits, tail, n)

    if model.window is not None:
        base = model.window.base
        w = model.window.width
        n_base = n + w - 1
        uniforms = np.stack([g.random(n_base + 1) for g in gens])
        base_states = _sample_chain_states(base.initial_law, base.transitions, uniforms)
        sb = base.n_states
        states = np.zeros((len(gens), n + 1), dtype=np.int64)
        for i in range(w):
            states = states * sb + base_states[:, i : i + n + 1]
    else:
        uniforms = np.stack([g.random(n + 1) for g in gens])
        states = _sample_chain_states(model.initial_law, model.transitions, uniforms)
    values = model.observables[np.arange(n)[None, :], states[:, 1:]]
    return values, states


def sample_paths(
    model: ArrayModel,
    seed: int,
    replicates: int | Sequence[int],
    n: int | None = None,
    n_jobs: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> PathBatch:
    """
    Sample many replicates of a model.

    Args:
        model: Validated model.
        seed: Master seed.
        replicates: Number of replicates (indices ``0..R-1``) or explicit indices.
        n: Prefix length, defaults to the full row.
        n_jobs: joblib worker count; results do not depend on it.
        chunk_size: Replicates per joblib task.

    Returns:
        PathBatch with values of shape ``(R, n)``.

    Raises:
        ResourceBudgetError: Expanding orbit longer than the orbit budget.
    """
    n = model.n if n is None else n
    if not 1 <= n <= model.n:
        raise ValidationError(f"Path length {n} outside 1..{model.n}")
    indices = np.arange(replicates) if isinstance(replicates, int) else np.asarray(replicates, dtype=np.int64)
    if indices.size == 0:
        raise ValidationError("At least one replicate is required")
    if model.kind is ModelKind.SEQUENTIAL_EXPANDING:
        check_orbit_budget(n)
    chunks = [indices[i : i + chunk_size] for i in range(0, indices.size, chunk_size)]
    if n_jobs == 1 or len(chunks) == 1:
        parts = [_sample_chunk(model, n, seed, c) for c in chunks]
    else:
        parts = Parallel(n_jobs=n_jobs)(delayed(_sample_chunk)(model, n, seed, c) for c in chunks)
    values = np.concatenate([p[0] for p in parts])
    states = np.concatenate([p[1] for p in parts])
    logger.debug("Sampled %d replicates of %s (n=%d, seed=%d)", indices.size, model.model_id, n, seed)
    return PathBatch(values, states, seed, indices, model.model_id)


def sample_path(model: ArrayModel, n: int, seed: int, replicate: int) -> SamplePath:
    """
    Sample one replicate.

    Args:
        model: Validated model.
        n: Number of indices, ``1 <= n <= model.n``.
        seed: 64-bit master seed.
        replicate: Replicate index.

    Returns:
        The sampled path; identical for identical ``(model, seed, replicate)``.
    """
    return sample_paths(model, seed, [replicate], n=n).path(0)


__all__ = [
    "replicate_generator",
    "SamplePath",
    "PathBatch",
    "sample_path",
    "sample_paths",
]
