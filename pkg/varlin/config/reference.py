"""Catalog of reference models exercised by the experiment harness."""

REFERENCE_MODELS: dict[str, str] = {
    # Independent arrays
    "iid": "iid fair signs -1/+1",
    # Finite-state chains
    "elliptic_chain": "time-varying uniformly elliptic 2-state chain",
    "geometric_chain": "stationary 2-state chain with Dobrushin coefficient 1/2",
    "slow_variance": "pair chain with coboundary plus sparse signal, Var(S_n) ~ n^gamma",
    "memory_markov": "binary process with memory m encoded on m-tuples",
    # Local windows
    "local_window": "window sums over iid signs, half-width ceil(log2(n)/4)",
    # Expanding maps
    "doubling": "sequential doubling maps with a cosine observable",
}

# Default builder arguments per reference model.
REFERENCE_DEFAULTS: dict[str, dict] = {
    "iid": {},
    "elliptic_chain": {"spread": 0.05},
    "geometric_chain": {"delta": 0.5},
    "slow_variance": {"gamma": 0.5},
    "memory_markov": {"memory": 3, "strength": 0.4},
    "local_window": {},
    "doubling": {"observable": "cosine"},
}


def get_model_description(name: str) -> str | None:
    """
    Get the description of a reference model.

    Args:
        name: Reference model name.

    Returns:
        Description, or None if the name is unknown.
    """
    return REFERENCE_MODELS.get(name)


def list_reference_models() -> list[str]:
    """
    Get a list of all reference model names.

    Returns:
        List of reference model names.
    """
    return list(REFERENCE_MODELS.keys())
