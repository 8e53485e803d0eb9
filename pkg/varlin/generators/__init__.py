"""Triangular arrays: model types, reference builders, sampling and model files."""

from varlin.generators.builders import (
    build_chain_model,
    build_doubling_model,
    build_elliptic_chain,
    build_geometric_chain,
    build_iid_model,
    build_memory_markov_model,
    build_slow_variance_model,
    stationary_law,
)
from varlin.generators.expanding import WindowApproximation, window_approximation
from varlin.generators.io import load_model_file
from varlin.generators.model import ArrayModel, ExpandingSpec, ModelKind, WindowSpec, finite_model, validate_model
from varlin.generators.sampling import PathBatch, SamplePath, sample_path, sample_paths
from varlin.generators.window import WINDOW_FUNCTIONALS, list_window_functionals, local_window_array

__all__ = [
    "build_chain_model",
    "build_doubling_model",
    "build_elliptic_chain",
    "build_geometric_chain",
    "build_iid_model",
    "build_memory_markov_model",
    "build_slow_variance_model",
    "stationary_law",
    "WindowApproximation",
    "window_approximation",
    "load_model_file",
    "ArrayModel",
    "ExpandingSpec",
    "ModelKind",
    "WindowSpec",
    "finite_model",
    "validate_model",
    "PathBatch",
    "SamplePath",
    "sample_path",
    "sample_paths",
    "WINDOW_FUNCTIONALS",
    "list_window_functionals",
    "local_window_array",
]
