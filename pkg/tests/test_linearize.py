import math
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from varlin.errors import DegenerateVarianceError, DomainError, InfeasibleMixingError, InvariantViolationError
from varlin.generators import build_geometric_chain, build_iid_model, local_window_array
from varlin.linearize import (
    block_window_maxima,
    constants_for_model,
    estimate_beta,
    find_separation,
    first_mixing_lag,
    growth_constants,
    partition_blocks,
    sequence_partition,
    verify_partition,
    window_growth_check,
)
from varlin.mixing import MixingProfile, declared_window_profile, profile_for_model
from varlin.oracle import ExactVarianceOracle

GEOMETRIC_RHO = 0.5 ** np.arange(1, 201)


def _iid_setup(n):
    model = build_iid_model(n)
    oracle = ExactVarianceOracle(model)
    profile = profile_for_model(model)
    return model, oracle, profile, constants_for_model(model, profile, oracle)


def test_separation_without_dependence():
    assert find_separation(np.zeros(50), 50) == 1


def test_separation_of_geometric_rho():
    # r = 2 leaves 1/3, r = 3 leaves 1/7
    assert find_separation(GEOMETRIC_RHO, 200) == 3


def test_separation_is_infeasible_for_flat_rho():
    with pytest.raises(InfeasibleMixingError):
        find_separation(np.full(20, 0.3), 20)


def test_separation_rejects_out_of_range_rho():
    with pytest.raises(DomainError):
        find_separation(np.array([1.5, 0.0]), 2)


def test_iid_constants():
    constants = growth_constants(MixingProfile(n=100, rho=np.zeros(100)), K=1.0, sigma=10.0)
    assert (constants.C, constants.D, constants.r, constants.Q) == (0.0, 1.0, 1, 2.0)
    assert constants.A == 4.0
    assert constants.valid


def test_geometric_constants():
    constants = growth_constants(MixingProfile(n=200, rho=GEOMETRIC_RHO), K=1.0, sigma=100.0)
    assert constants.C == pytest.approx(2.0, rel=1e-12)
    assert constants.D == pytest.approx(3.0, rel=1e-12)
    assert constants.r == 3
    assert constants.Q == pytest.approx(42.0, rel=1e-12)


def test_little_o_gate_is_reported():
    constants = growth_constants(MixingProfile(n=200, rho=GEOMETRIC_RHO), K=1.0, sigma=10.0)
    assert constants.qn_floor_ok
    assert not constants.qn_little_o_ok
    assert not constants.valid


def test_iid_blocks_repeat_with_period_five():
    _, oracle, _, constants = _iid_setup(50)
    partition = partition_blocks(oracle, constants)
    assert partition.k == 10
    assert partition.blocks[0] == (1, 5)
    assert partition.core_ends[0] == 4
    assert_allclose(partition.block_variances, 5.0, atol=1e-12)
    assert partition.blocks[-1] == (46, 50)


def test_last_block_absorbs_the_remainder():
    _, oracle, _, constants = _iid_setup(48)
    partition = partition_blocks(oracle, constants)
    assert partition.blocks[-1] == (41, 48)
    assert partition.block_variances[-1] == pytest.approx(8.0)
    starts, ends = partition.starts, partition.ends
    assert starts[0] == 1 and ends[-1] == 48
    assert_array_equal(starts[1:], ends[:-1] + 1)


def test_small_row_is_degenerate():
    model = build_iid_model(3)
    oracle = ExactVarianceOracle(model)
    constants = growth_constants(profile_for_model(model), K=1.0, sigma=math.sqrt(3.0))
    with pytest.raises(DegenerateVarianceError):
        partition_blocks(oracle, constants)


def test_oversized_gap_is_an_invariant_violation():
    _, oracle, _, constants = _iid_setup(200)
    with pytest.raises(InvariantViolationError) as info:
        partition_blocks(oracle, replace(constants, r=30))
    assert info.value.check_id == "block_variance"


def test_partition_is_deterministic(elliptic_chain):
    oracle = ExactVarianceOracle(elliptic_chain)
    constants = constants_for_model(elliptic_chain, profile_for_model(elliptic_chain), oracle)
    first = partition_blocks(oracle, constants)
    second = partition_blocks(oracle, constants)
    assert first.blocks == second.blocks
    assert first.core_ends == second.core_ends


def test_partition_csv(tmp_path):
    _, oracle, _, constants = _iid_setup(20)
    path = tmp_path / "partition.csv"
    partition_blocks(oracle, constants).to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "j,a_j,b_j,core_end,block_variance"
    assert lines[1] == "1,1,5,4,5.0"


def test_iid_certification_is_exact():
    _, oracle, _, constants = _iid_setup(50)
    partition = partition_blocks(oracle, constants)
    report = verify_partition(partition, oracle, constants)
    assert report.passed
    checks = {c.check_id: c for c in report.checks}
    # zero covariances: the union of cores has the summed variance
    assert checks["core_union_lower"].rhs == pytest.approx(sum(partition.core_variances))
    assert checks["minimality[1]"].lhs == 3.0


def test_geometric_chain_certification():
    model = build_geometric_chain(1024)
    oracle = ExactVarianceOracle(model)
    profile = profile_for_model(model)
    constants = constants_for_model(model, profile, oracle)
    partition = partition_blocks(oracle, constants)
    report = verify_partition(partition, oracle, constants)
    assert report.passed, report.failures()
    assert any(c.check_id.startswith("gap_covariance") for c in report.checks)


def test_doctored_partition_is_flagged(tmp_path):
    _, oracle, _, constants = _iid_setup(50)
    partition = partition_blocks(oracle, constants)
    doctored = replace(partition, block_variances=partition.block_variances * 10)
    report = verify_partition(doctored, oracle, constants)
    assert not report.passed
    assert {c.check_id for c in report.failures()} >= {"block_upper[1]"}
    path = tmp_path / "certification.csv"
    report.to_csv(path)
    assert path.read_text().splitlines()[0] == "check_id,lhs,rhs,pass"


def test_inflated_rho_gives_fewer_blocks():
    model = build_iid_model(500)
    oracle = ExactVarianceOracle(model)
    sigma = math.sqrt(500.0)
    tight = growth_constants(MixingProfile(n=500, rho=np.zeros(500)), 1.0, sigma)
    loose = growth_constants(MixingProfile(n=500, rho=0.5 ** np.arange(1, 501)), 1.0, sigma)
    assert loose.r >= tight.r and loose.Q >= tight.Q
    assert partition_blocks(oracle, loose).k == 5
    assert partition_blocks(oracle, tight).k == 100


def test_window_growth_check():
    window = local_window_array(build_geometric_chain(40), 1, "sum")
    oracle = ExactVarianceOracle(window)
    constants = constants_for_model(window, declared_window_profile(window), oracle)
    growth = window_growth_check(window, constants)
    assert growth.ratio == pytest.approx(constants.Q / constants.K**2)
    assert growth.passed == (growth.ratio <= growth.limit)


def test_window_growth_needs_a_window(iid_signs):
    _, oracle, profile, constants = _iid_setup(64)
    with pytest.raises(DomainError):
        window_growth_check(iid_signs, constants)


def test_sequence_partition_of_signs():
    seq = sequence_partition(build_iid_model(100))
    assert seq.A1 == pytest.approx(2.0)
    assert seq.A2 <= 3.0
    assert seq.slope == pytest.approx(5.0)
    assert seq.k_of(12) == 2
    assert seq.boundary(12) == 10
    assert seq.boundary(4) == 0
    assert seq.R1 == pytest.approx(5.0)
    assert seq.report.passed


def test_sequence_partition_needs_two_blocks():
    with pytest.raises(DegenerateVarianceError):
        sequence_partition(build_iid_model(8))


def test_first_mixing_lag():
    assert first_mixing_lag(MixingProfile(n=3, phi=np.array([0.5, 0.4, 0.2]))) == 3
    assert first_mixing_lag(MixingProfile(n=2, phi=np.array([0.9, 0.8]))) is None


def test_block_window_maxima():
    values = np.array([[1.0, 1.0, -1.0, -1.0, -1.0, 1.0], [-1.0, 1.0, 1.0, 1.0, 1.0, 1.0]])
    partition = SimpleNamespace(k=2, blocks=[(1, 3), (4, 6)])
    assert_array_equal(block_window_maxima(values, partition), [[2.0, 2.0], [1.0, 3.0]])


def test_iid_beta():
    model, oracle, profile, constants = _iid_setup(50)
    partition = partition_blocks(oracle, constants)
    beta = estimate_beta(model, partition, constants, profile, p0=4.0, replicates=800, seed=3)
    assert beta.j_n == 1
    assert 0.0 < beta.empirical < math.inf
    assert beta.standard_error > 0.0
    assert beta.empirical <= beta.analytic


def test_beta_needs_high_moments():
    model, oracle, profile, constants = _iid_setup(50)
    partition = partition_blocks(oracle, constants)
    with pytest.raises(DomainError):
        estimate_beta(model, partition, constants, profile, p0=2.0, replicates=10)
