"""Shared fixtures for the varlin test suite."""

import numpy as np
import pytest

from varlin.config.tolerance import apply_tolerance_profile
from varlin.generators import build_chain_model, build_elliptic_chain, build_geometric_chain, build_iid_model


@pytest.fixture(autouse=True)
def default_tolerances():
    """Every test starts (and ends) on the default tolerance profile."""
    apply_tolerance_profile("default")
    yield
    apply_tolerance_profile("default")


@pytest.fixture
def iid_signs():
    """Fair +-1 signs, n = 64."""
    return build_iid_model(64)


@pytest.fixture
def skewed_iid():
    """Skewed lattice marginal {-1, 2} with P(2) = 1/3."""
    return build_iid_model(64, values=(-1.0, 2.0), probs=(2 / 3, 1 / 3))


@pytest.fixture
def biased_chain():
    """Three-step two-state chain with biased, index-dependent rows."""
    trans = np.array(
        [
            [[0.7, 0.3], [0.2, 0.8]],
            [[0.6, 0.4], [0.5, 0.5]],
            [[0.9, 0.1], [0.3, 0.7]],
        ]
    )
    return build_chain_model(trans, np.array([0.0, 1.0]), initial_law=np.array([0.4, 0.6]), model_id="biased")


@pytest.fixture
def geometric_chain():
    return build_geometric_chain(256)


@pytest.fixture
def elliptic_chain():
    return build_elliptic_chain(512)
