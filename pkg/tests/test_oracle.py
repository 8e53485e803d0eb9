import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from varlin.errors import DomainError, ResourceBudgetError, UnsupportedModelError, UnsupportedOrderError
from varlin.config.tolerance import BudgetConfig, get_config, update_config
from varlin.generators import build_chain_model, build_doubling_model, build_iid_model
from varlin.oracle import (
    ExactVarianceOracle,
    LatticePmf,
    MonteCarloVarianceOracle,
    TailSide,
    covariance,
    cross_covariance,
    exact_sum_pmf,
    marginal_norm,
    moments_and_cumulants,
    oracle_for_model,
    raw_moment,
    sup_norm,
    tail_probability,
    variance_of_range,
    variance_profile,
)


def _enumerate_sum(model):
    """Brute-force law of S_n over all state paths."""
    S = model.n_states
    dist: dict[float, float] = {}
    for path in itertools.product(range(S), repeat=model.n + 1):
        p = model.initial_law[path[0]]
        for j in range(1, model.n + 1):
            p *= model.transitions[j - 1][path[j - 1], path[j]]
        s = round(sum(model.observables[j - 1, path[j]] for j in range(1, model.n + 1)), 9)
        dist[s] = dist.get(s, 0.0) + p
    return dist


def test_two_fair_signs():
    pmf = exact_sum_pmf(build_iid_model(4), 1, 2)
    support = {round(v, 12): w for v, w in zip(pmf.values, pmf.weights) if w > 0}
    assert support == pytest.approx({-2.0: 0.25, 0.0: 0.5, 2.0: 0.25})


def test_single_index_is_the_marginal(biased_chain):
    pmf = exact_sum_pmf(biased_chain, 2, 2)
    kept = pmf.weights[pmf.weights > 0]
    assert_allclose(np.sort(kept), np.sort(biased_chain.marginals[2]), atol=1e-15)


def test_chain_pmf_matches_enumeration(biased_chain):
    pmf = exact_sum_pmf(biased_chain)
    dist = _enumerate_sum(biased_chain)
    total_variation = 0.0
    for v, w in zip(pmf.values, pmf.weights):
        match = sum(p for s, p in dist.items() if abs(s - v) < 1e-7)
        total_variation += abs(w - match)
    assert total_variation <= 1e-12


def test_pmf_budget(iid_signs):
    update_config(budget=BudgetConfig(lattice_points=16))
    try:
        with pytest.raises(ResourceBudgetError):
            exact_sum_pmf(iid_signs)
    finally:
        update_config(budget=BudgetConfig())


def test_pmf_needs_finite_model():
    with pytest.raises(UnsupportedModelError):
        exact_sum_pmf(build_doubling_model(8))


def test_iid_variance_is_additive():
    model = build_iid_model(20)
    assert variance_of_range(model, 3, 7) == pytest.approx(5.0, abs=1e-12)


def test_coboundary_variance_is_bounded():
    # xi_j = h(zeta_j) - h(zeta_{j-1}) written on pair states (zeta_{j-1}, zeta_j)
    pair_prev = np.array([0, 0, 1, 1])
    pair_cur = np.array([0, 1, 0, 1])
    matrix = np.zeros((4, 4))
    for s in range(4):
        matrix[s, 2 * pair_cur[s]] = 0.3
        matrix[s, 2 * pair_cur[s] + 1] = 0.7
    law = np.array([0.09, 0.21, 0.21, 0.49])
    model = build_chain_model(matrix, (pair_cur - pair_prev).astype(float), initial_law=law, n=64)
    oracle = ExactVarianceOracle(model)
    for m in (8, 32, 64):
        brute = sum(oracle.covariance(i, j) for i in range(1, m + 1) for j in range(1, m + 1))
        assert oracle.variance(1, m) == pytest.approx(brute, abs=1e-9)
    assert oracle.variance(1, 64) <= 2.0


def test_variance_matches_pmf_second_moment(biased_chain):
    pmf = exact_sum_pmf(biased_chain)
    mean = pmf.mean()
    second = math.fsum(pmf.weights * (pmf.values - mean) ** 2)
    assert variance_of_range(biased_chain, 1, biased_chain.n) == pytest.approx(second, abs=1e-9)


def test_suffix_variances_match_direct(elliptic_chain):
    oracle = ExactVarianceOracle(elliptic_chain)
    suffix = oracle.suffix_variances(10, 40)
    for t in (10, 25, 40):
        assert suffix[t - 10] == pytest.approx(oracle.variance(t, 40), abs=1e-9)


def test_iid_covariances_vanish(iid_signs):
    assert covariance(iid_signs, 3, 3) == pytest.approx(1.0)
    assert abs(covariance(iid_signs, 3, 9)) <= 1e-14


def test_chain_covariance_decays(geometric_chain):
    # Dobrushin coefficient 1/2 for the symmetric chain: Cov(xi_i, xi_{i+k}) = 2^-k
    for k in (1, 2, 5):
        assert covariance(geometric_chain, 10, 10 + k) == pytest.approx(0.5**k, abs=1e-12)


def test_cross_covariance_is_a_covariance_sum(elliptic_chain):
    direct = sum(covariance(elliptic_chain, i, j) for i in range(5, 9) for j in range(9, 14))
    assert cross_covariance(elliptic_chain, 5, 8, 13) == pytest.approx(direct, abs=1e-12)


def test_cross_covariance_domain(elliptic_chain):
    with pytest.raises(DomainError):
        cross_covariance(elliptic_chain, 5, 9, 9)


def test_monte_carlo_oracle_tracks_exact(elliptic_chain):
    mc = MonteCarloVarianceOracle(elliptic_chain, replicates=4000, seed=1)
    exact = ExactVarianceOracle(elliptic_chain)
    v = exact.variance(1, 100)
    assert mc.variance(1, 100) == pytest.approx(v, abs=4 * mc.standard_error(1, 100))
    assert mc.marginal_norm(2.0) == pytest.approx(1.0)


def test_oracle_routing(elliptic_chain):
    assert isinstance(oracle_for_model(elliptic_chain), ExactVarianceOracle)
    assert isinstance(oracle_for_model(build_doubling_model(32), replicates=10), MonteCarloVarianceOracle)


def test_variance_profile(iid_signs):
    profile = variance_profile(iid_signs)
    assert_allclose(profile.variances, np.arange(65), atol=1e-9)
    assert profile.sigma == pytest.approx(8.0)


def test_marginal_norms(skewed_iid):
    # values -1 (2/3), 2 (1/3)
    assert marginal_norm(skewed_iid, 2.0) == pytest.approx(math.sqrt(2.0))
    assert marginal_norm(skewed_iid, 4.0) == pytest.approx(6.0**0.25)
    assert sup_norm(skewed_iid) == 2.0
    assert marginal_norm(skewed_iid, math.inf) == 2.0


def test_tail_probabilities():
    pmf = exact_sum_pmf(build_iid_model(4))
    assert tail_probability(pmf, 4.0).probability == pytest.approx(1 / 16)
    assert tail_probability(pmf, -10.0, TailSide.GE).probability == 1.0
    assert tail_probability(pmf, 10.0).log_probability == -math.inf


@pytest.mark.parametrize("t", [-3.0, -2.0, 0.0, 0.5, 2.0, 4.0])
def test_tails_are_complementary(t):
    pmf = exact_sum_pmf(build_iid_model(6))
    ge = tail_probability(pmf, t, TailSide.GE).probability
    lt = tail_probability(pmf, t, TailSide.LT).probability
    assert ge + lt == pytest.approx(1.0, abs=1e-12)


def test_log_tail_of_the_extreme_point():
    pmf = exact_sum_pmf(build_iid_model(1000))
    tail = tail_probability(pmf, 1000.0)
    assert tail.log_probability == pytest.approx(-1000 * math.log(2.0), rel=1e-12)


def test_symmetric_law_has_no_odd_cumulants():
    summary = moments_and_cumulants(exact_sum_pmf(build_iid_model(9)), 7)
    for k in (3, 5, 7):
        assert abs(summary.cumulants[k]) <= 1e-12


def test_fair_sign_cumulants():
    pmf = LatticePmf(-1.0, 2.0, np.array([0.5, 0.5]))
    summary = moments_and_cumulants(pmf, 4)
    assert summary.cumulants[2] == pytest.approx(1.0)
    assert summary.cumulants[4] == pytest.approx(-2.0)


def test_rescaling_multiplies_cumulants():
    pmf = exact_sum_pmf(build_iid_model(7, values=(-1.0, 2.0), probs=(2 / 3, 1 / 3)))
    base = moments_and_cumulants(pmf, 3).cumulants[3]
    scaled = moments_and_cumulants(pmf.rescale(3.0), 3).cumulants[3]
    assert scaled == pytest.approx(27.0 * base, rel=1e-9)


def test_moment_order_limits():
    pmf = LatticePmf(-1.0, 2.0, np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        moments_and_cumulants(pmf, 1)
    with pytest.raises(UnsupportedOrderError):
        raw_moment(pmf, get_config().budget.max_moment_order + 1)


@settings(max_examples=30, deadline=None)
@given(
    weights=st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=2, max_size=6),
    factor=st.sampled_from([0.5, 2.0, 3.0]),
)
def test_rescaled_variance_scales_quadratically(weights, factor):
    w = np.array(weights) / math.fsum(weights)
    pmf = LatticePmf(0.0, 1.0, w / w.sum())
    base = moments_and_cumulants(pmf, 2).variance
    scaled = moments_and_cumulants(pmf.rescale(factor), 2).variance
    assert scaled == pytest.approx(factor**2 * base, rel=1e-9)
