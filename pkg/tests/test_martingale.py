import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from varlin.errors import DomainError, PreconditionError
from varlin.generators import build_geometric_chain, build_iid_model, build_memory_markov_model, sample_paths
from varlin.linearize import constants_for_model, growth_constants, partition_blocks
from varlin.martingale import (
    block_b_terms,
    block_maxima_bound,
    block_sums,
    build_path_pair,
    coupled_pair_bounds,
    future_conditional_sum,
    future_conditional_sums,
    grouping_rate,
    ky_fan_distance,
    lyapunov_sum,
    martingale_b_terms,
    martingale_differences,
    maximal_constant,
    maximal_inequality_check,
    memory_coefficient,
    memory_rate,
    prokhorov_bound,
    quadratic_variation,
    rate_bounds,
    residual_bound_check,
    sequential_constants,
    time_change,
    variance_transfer_gap,
    write_bounds_csv,
)
from varlin.mixing import MixingProfile, profile_for_model, varpi_sum
from varlin.oracle import ExactVarianceOracle, marginal_norm, variance_profile


def _constants(model):
    profile = profile_for_model(model)
    return profile, constants_for_model(model, profile, ExactVarianceOracle(model))


def _setup(model):
    profile, constants = _constants(model)
    return profile, constants, partition_blocks(ExactVarianceOracle(model), constants)


@pytest.fixture
def iid_case():
    model = build_iid_model(100)
    profile, constants, partition = _setup(model)
    return model, profile, constants, partition, martingale_differences(model, partition)


@pytest.fixture
def elliptic_case(elliptic_chain):
    profile, constants, partition = _setup(elliptic_chain)
    return elliptic_chain, profile, constants, partition, martingale_differences(elliptic_chain, partition)


def test_residuals_vanish_for_iid(iid_signs):
    assert_allclose(future_conditional_sums(iid_signs), 0.0, atol=1e-15)


def test_last_residual_is_zero(biased_chain):
    assert_allclose(future_conditional_sum(biased_chain, biased_chain.n), 0.0)


def test_residual_matches_path_enumeration(biased_chain):
    P2, P3 = biased_chain.transitions[1], biased_chain.transitions[2]
    g2, g3 = biased_chain.observables[1], biased_chain.observables[2]
    expected = np.zeros(2)
    for s in range(2):
        for t, u in itertools.product(range(2), repeat=2):
            expected[s] += P2[s, t] * P3[t, u] * (g2[t] + g3[u])
    assert_allclose(future_conditional_sum(biased_chain, 1), expected, atol=1e-14)


def test_residual_index_range(biased_chain):
    with pytest.raises(DomainError):
        future_conditional_sum(biased_chain, biased_chain.n + 1)


def test_iid_differences_are_the_block_sums(iid_case):
    model, _, _, partition, decomp = iid_case
    batch = sample_paths(model, seed=4, replicates=50)
    assert_allclose(decomp.block_differences(batch), block_sums(batch, partition), atol=1e-12)
    assert_allclose(decomp.expected_squares, [b - a + 1 for a, b in partition.blocks])
    assert decomp.normalized_expected_squares.sum() == pytest.approx(1.0, abs=1e-12)


def test_chain_decomposition_is_a_martingale(elliptic_case):
    model, _, _, _, decomp = elliptic_case
    assert decomp.martingale_residual <= 1e-10
    batch = sample_paths(model, seed=9, replicates=40)
    assert decomp.telescoping_residual(batch) <= 1e-10
    assert variance_transfer_gap(decomp) <= 1e-9 * max(1.0, decomp.sigma**2)


def test_residual_bound(elliptic_case):
    model, profile, constants, _, decomp = elliptic_case
    check = residual_bound_check(decomp, marginal_norm(model, 4.0), constants.Q, 1.0, varpi_sum(profile, 4.0))
    assert check.passed


def test_time_change_on_signs(iid_case):
    model, _, constants, partition, _ = iid_case
    profile = variance_profile(model)
    half = time_change(profile, partition, 0.5, constants)
    assert half.v == 50
    assert half.gap == pytest.approx(0.0, abs=1e-9)
    assert half.within_bound
    assert time_change(profile, partition, 0.0).v == 1
    end = time_change(profile, partition, 1.0)
    assert (end.v, end.j) == (100, partition.k)
    assert end.bound is None and end.within_bound is None


def test_time_change_domain(iid_case):
    model, _, _, partition, _ = iid_case
    with pytest.raises(DomainError):
        time_change(variance_profile(model), partition, 1.5)


def test_path_pair_identities(elliptic_case):
    model, _, _, _, decomp = elliptic_case
    batch = sample_paths(model, seed=2, replicates=30)
    pairs = build_path_pair(decomp, batch, grid_size=64)
    assert np.all(np.diff(pairs.v) >= 0)
    resid = decomp.residual_on_paths(batch)
    expected = pairs.cal_W[:, -1] + (resid[:, model.n] - resid[:, 0]) / decomp.sigma
    assert_allclose(pairs.M[:, -1], expected, atol=1e-10)


def test_path_pair_csv(tmp_path, iid_case):
    model, _, _, _, decomp = iid_case
    pairs = build_path_pair(decomp, sample_paths(model, seed=0, replicates=2), grid_size=3)
    path = tmp_path / "paths.csv"
    pairs.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "replicate,t,W,cal_W,M,QV"
    assert len(lines) == 1 + 2 * 3


def test_path_pair_size_mismatch(iid_case):
    _, _, _, _, decomp = iid_case
    with pytest.raises(DomainError):
        build_path_pair(decomp, sample_paths(build_iid_model(50), seed=0, replicates=2))


def test_quadratic_variation_of_signs(iid_case):
    model, _, _, _, decomp = iid_case
    qv = quadratic_variation(decomp, sample_paths(model, seed=1, replicates=120), grid_size=101)
    assert qv.expected_terminal == pytest.approx(1.0, abs=1e-12)
    assert qv.report.passed
    assert qv.qv_gap_bound is None
    # iid increments are deterministic, so every replicate carries the same path
    assert np.ptp(qv.sup_deviation) == pytest.approx(0.0, abs=1e-12)
    assert qv.max_deterministic_gap <= 5 / 100 + 1e-12


def test_quadratic_variation_of_a_chain(elliptic_case):
    model, _, constants, _, decomp = elliptic_case
    qv = quadratic_variation(decomp, sample_paths(model, seed=5, replicates=150), grid_size=128, constants=constants)
    assert abs(qv.expected_terminal - 1.0) <= 0.1
    assert qv.report.passed
    assert qv.qv_gap_bound > 0.0
    assert 0.0 <= qv.ky_fan <= 1.0


def test_quadratic_variation_needs_replicates(iid_case):
    model, _, _, _, decomp = iid_case
    with pytest.raises(DomainError):
        quadratic_variation(decomp, sample_paths(model, seed=1, replicates=50))


@pytest.mark.parametrize(
    "sample, expected",
    [([0.0, 0.0, 0.0], 0.0), ([1.0, 1.0, 1.0, 1.0], 1.0), ([0.9, 0.1, 0.1, 0.1], 0.25)],
)
def test_ky_fan_distance(sample, expected):
    assert ky_fan_distance(np.array(sample)) == pytest.approx(expected)


def test_ky_fan_of_nothing():
    with pytest.raises(DomainError):
        ky_fan_distance(np.array([]))


def test_prokhorov_and_block_maxima_helpers():
    assert prokhorov_bound(np.ones(10), 2.0) == pytest.approx(1.0)
    assert block_maxima_bound(np.array([1.0, 2.0]), 2.0) == pytest.approx(2.0 * math.sqrt(2.0))


def test_coupled_bounds_dominate_direct_estimates(elliptic_case):
    model, _, _, _, decomp = elliptic_case
    batch = sample_paths(model, seed=8, replicates=60)
    pairs = build_path_pair(decomp, batch, grid_size=256)
    bounds = coupled_pair_bounds(decomp, batch, pairs)
    assert bounds.q == 4.0
    assert bounds.w_cal_w <= bounds.w_cal_w_block_bound + 1e-12
    assert bounds.cal_w_m <= bounds.cal_w_m_block_bound + 1e-12


def test_lyapunov_sum():
    assert lyapunov_sum(np.full((3, 4), 2.0), sigma=2.0, p0=4.0) == pytest.approx(4.0)


def test_grouping_rate_values():
    assert grouping_rate(1.0, 1.0, 4.0) == pytest.approx(3.0)
    assert grouping_rate(10.0, 100.0, 4.0) == pytest.approx(0.447850, abs=1e-6)


def test_memory_rate_without_memory_term():
    assert memory_rate(10.0, 100.0, 4.0, 0.0) == pytest.approx(0.1 + math.sqrt(10.0) / 100.0)


def test_rate_bounds_range():
    model = build_iid_model(1000)
    profile, constants, _ = _setup(model)
    seq = sequential_constants(profile, constants, K_p0=1.0)
    bounds = rate_bounds(constants, seq, 10.0)
    assert bounds.grouping_rate == pytest.approx(grouping_rate(10.0, math.sqrt(1000.0), 4.0))
    assert bounds.rhs_grouping > 0.0
    with pytest.raises(PreconditionError):
        rate_bounds(constants, seq, 100.0)
    with pytest.raises(DomainError):
        rate_bounds(constants, seq, 0.5)


def test_bounds_csv_columns(tmp_path):
    model = build_iid_model(1000)
    profile, constants, _ = _setup(model)
    seq = sequential_constants(profile, constants, K_p0=1.0)
    bounds = rate_bounds(constants, seq, 10.0)
    path = tmp_path / "bounds.csv"
    write_bounds_csv([bounds], path)
    header, row = path.read_text().splitlines()
    assert header == "n,sigma,q_n_frak,w_n,rhs_thm24,rhs_thm25,A1,A2"
    assert row.split(",")[0] == "1000"
    assert float(row.split(",")[2]) == pytest.approx(bounds.grouping_rate)


def test_sequential_constants_order(elliptic_case):
    _, profile, constants, _, _ = elliptic_case
    seq = sequential_constants(profile, constants, K_p0=1.0)
    assert seq.A2 >= seq.A1 >= seq.C1 >= 0.0
    assert seq.q_n >= 1.0
    assert seq.Pi[4.0] == seq.q_n


def test_iid_sequential_constants():
    profile = MixingProfile(n=10, alpha=np.zeros(10), rho=np.zeros(10), phi=np.zeros(10))
    constants = growth_constants(profile, K=1.0, sigma=10.0)
    seq = sequential_constants(profile, constants, K_p0=1.0)
    assert seq.q_n == 1.0
    assert seq.iota == 1.0


def test_declared_memory_has_no_memory_cost():
    model = build_memory_markov_model(64, memory=3)
    profile, constants = _constants(model)
    assert memory_coefficient(model, 4.0, 3, profile, constants) == 0.0
    assert memory_coefficient(model, 4.0, 64, profile, constants) == 0.0
    assert memory_coefficient(model, 4.0, 1, profile, constants) > 0.0


def test_memory_bound_decays_geometrically():
    chain = build_geometric_chain(256)
    profile, constants = _constants(chain)
    undeclared = replace(chain, memory=None)
    values = [memory_coefficient(undeclared, 4.0, m, profile, constants) for m in (5, 10, 20)]
    assert values[0] > values[1] > values[2]
    assert values[2] / values[1] < 0.2


def test_maximal_constant():
    assert maximal_constant(2.0) == 16.0
    with pytest.raises(DomainError):
        maximal_constant(1.5)


def test_maximal_inequality_for_signs():
    rng = np.random.default_rng(0)
    summands = rng.choice([-1.0, 1.0], size=(4000, 10))
    check = maximal_inequality_check(summands, martingale_b_terms(summands, 4.0), 4.0)
    assert check.passed
    assert check.slack > 0.0
    single = maximal_inequality_check(summands[:, :1], np.ones(1), 4.0)
    assert single.bound_sum == pytest.approx(math.sqrt(8.0))
    assert single.passed


def test_maximal_inequality_shape_check():
    with pytest.raises(DomainError):
        maximal_inequality_check(np.ones((5, 3)), np.ones(2), 4.0)


def test_block_terms_reduce_to_martingale_terms(iid_case):
    model, _, _, partition, decomp = iid_case
    batch = sample_paths(model, seed=6, replicates=200)
    assert_allclose(
        block_b_terms(decomp, batch, 4.0),
        martingale_b_terms(block_sums(batch, partition), 4.0),
        rtol=1e-12,
    )
