import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from numpy.testing import assert_allclose

from varlin.config.tolerance import BudgetConfig, update_config
from varlin.errors import (
    MissingDataError,
    ResourceBudgetError,
    UnsupportedModelError,
    UnsupportedOrderError,
    ValidationError,
)
from varlin.generators import build_chain_model, build_doubling_model, build_geometric_chain, local_window_array
from varlin.generators.expanding import window_approximation
from varlin.mixing import (
    MixingProfile,
    Provenance,
    brute_force_varpi,
    consistency_check,
    contraction_coefficient,
    declared_expanding_profile,
    declared_window_profile,
    definitional_alpha_phi,
    dobrushin_phi_profile,
    exact_chain_profile,
    interpolate_bound,
    is_homogeneous_stationary,
    profile_for_model,
    rho_sum,
    varpi_profile,
    varpi_sum,
)

FAIR_BIT = np.array([[0.5, 0.0], [0.0, 0.5]])


def test_contraction_coefficient():
    assert contraction_coefficient(np.eye(3)) == 1.0
    assert contraction_coefficient(np.tile([0.2, 0.8], (2, 1))) == 0.0
    assert contraction_coefficient(np.array([[0.9, 0.1], [0.1, 0.9]])) == pytest.approx(0.8)


def test_identical_rows_forget_in_one_step():
    law = np.array([0.3, 0.7])
    model = build_chain_model(np.tile(law, (2, 1)), np.array([-1.0, 1.0]), initial_law=law, n=12)
    profile = dobrushin_phi_profile(model)
    assert_allclose(profile.phi, 0.0)
    assert_allclose(profile.rho, 0.0)


def test_homogeneous_dobrushin_decay():
    model = build_chain_model(np.array([[0.9, 0.1], [0.1, 0.9]]), np.array([-1.0, 1.0]), n=30)
    profile = dobrushin_phi_profile(model)
    lags = np.arange(1, 31)
    assert np.all(profile.phi <= 0.8**lags + 1e-12)
    assert profile.provenance["phi"] == Provenance.DOBRUSHIN


def test_dobrushin_dominates_the_exact_profile(biased_chain):
    bound = dobrushin_phi_profile(biased_chain)
    exact = exact_chain_profile(biased_chain)
    assert np.all(bound.phi >= exact.phi - 1e-12)


def test_exact_first_lag_matches_brute_force(biased_chain):
    exact = exact_chain_profile(biased_chain)
    marg = biased_chain.marginals
    joints = np.stack([np.diag(marg[k]) @ biased_chain.transitions[k] for k in range(biased_chain.n)])
    phi = 0.5 * brute_force_varpi(joints, math.inf, math.inf)
    alpha = 0.25 * brute_force_varpi(joints, math.inf, 1)
    rho = brute_force_varpi(joints, 2, 2)
    assert exact.phi[0] == pytest.approx(phi.max(), abs=1e-12)
    assert exact.alpha[0] == pytest.approx(alpha.max(), abs=1e-12)
    assert exact.rho[0] == pytest.approx(rho.max(), abs=1e-12)


def test_dobrushin_profiles_are_submultiplicative(elliptic_chain):
    phi = dobrushin_phi_profile(elliptic_chain, n=40).phi
    for a in range(1, 20):
        for b in range(1, 20):
            assert phi[a + b - 1] <= phi[a - 1] * phi[b - 1] + 1e-12


def test_exact_profile_of_the_geometric_chain():
    model = build_geometric_chain(64, delta=0.5)
    assert is_homogeneous_stationary(model)
    profile = exact_chain_profile(model)
    # P^j = 1/2 + 2^-j / 2 on the diagonal
    assert_allclose(profile.phi[:5], 0.5 ** np.arange(1, 6) / 2, atol=1e-12)
    assert_allclose(profile.rho[:5], 0.5 ** np.arange(1, 6), atol=1e-12)
    assert consistency_check(profile) == []


def test_exact_profile_budget(elliptic_chain):
    update_config(budget=BudgetConfig(varpi_states=1))
    try:
        with pytest.raises(ResourceBudgetError):
            exact_chain_profile(elliptic_chain)
    finally:
        update_config(budget=BudgetConfig())


def test_routing_falls_back_to_dobrushin(biased_chain, iid_signs):
    assert profile_for_model(biased_chain).provenance["phi"] == Provenance.DOBRUSHIN
    assert profile_for_model(build_geometric_chain(32)).provenance["phi"] == Provenance.EXACT
    assert rho_sum(profile_for_model(iid_signs)) == 0.0


def test_dobrushin_needs_a_chain():
    with pytest.raises(UnsupportedModelError):
        dobrushin_phi_profile(build_doubling_model(8))


def test_window_profile_shifts_the_base():
    base = build_geometric_chain(20)
    window = local_window_array(base, 1, "sum")
    profile = declared_window_profile(window)
    base_profile = profile_for_model(base)
    assert profile.n == window.n
    assert_allclose(profile.phi[:2], 1.0)
    assert_allclose(profile.phi[2:], base_profile.phi[: window.n - 2], atol=1e-15)
    assert profile.provenance["rho"] == Provenance.DECLARED


def test_expanding_profile_has_finite_range():
    approx = window_approximation(build_doubling_model(16), 4, replicates=10).model
    profile = declared_expanding_profile(approx)
    assert_allclose(profile.phi[:3], 1.0)
    assert_allclose(profile.phi[3:], 0.0)


def test_exact_expanding_model_has_no_declared_profile():
    with pytest.raises(UnsupportedModelError):
        declared_expanding_profile(build_doubling_model(16))


def test_profile_csv_roundtrip(tmp_path, elliptic_chain):
    profile = dobrushin_phi_profile(elliptic_chain, n=10)
    path = tmp_path / "mixing.csv"
    profile.to_csv(path)
    loaded = MixingProfile.from_csv(path)
    assert_allclose(loaded.phi, profile.phi)
    assert loaded.provenance["alpha"] == Provenance.DOBRUSHIN


def test_profile_rejects_out_of_range_alpha():
    with pytest.raises(ValidationError):
        MixingProfile(n=1, alpha=np.array([0.5]))


def test_independent_blocks_have_zero_varpi():
    joint = np.outer([0.3, 0.7], [0.6, 0.4])
    for q, p in ((math.inf, 1), (math.inf, 2), (math.inf, math.inf), (2, 2)):
        assert brute_force_varpi(joint, q, p) == pytest.approx(0.0, abs=1e-15)


def test_fair_bit_against_itself():
    assert 0.5 * brute_force_varpi(FAIR_BIT, math.inf, math.inf) == pytest.approx(0.5)
    assert 0.25 * brute_force_varpi(FAIR_BIT, math.inf, 1) == pytest.approx(0.25)
    assert definitional_alpha_phi(FAIR_BIT) == pytest.approx((0.25, 0.5))


def test_maximal_correlation_of_two_bits():
    joint = np.array([[0.4, 0.1], [0.2, 0.3]])
    p, q = joint.sum(axis=1), joint.sum(axis=0)
    corr = (joint[1, 1] - p[1] * q[1]) / math.sqrt(p[0] * p[1] * q[0] * q[1])
    assert brute_force_varpi(joint, 2, 2) == pytest.approx(abs(corr), abs=1e-12)


def test_unsupported_orders():
    with pytest.raises(UnsupportedOrderError):
        brute_force_varpi(FAIR_BIT, 2, 1)
    with pytest.raises(UnsupportedOrderError):
        brute_force_varpi(FAIR_BIT, math.inf, 3)


def test_vertex_budget():
    update_config(budget=BudgetConfig(varpi_vertices=2))
    try:
        with pytest.raises(ResourceBudgetError):
            brute_force_varpi(FAIR_BIT, math.inf, 1)
    finally:
        update_config(budget=BudgetConfig())


@settings(max_examples=20, deadline=None)
@given(data=st.data(), rows=st.integers(2, 4), cols=st.integers(2, 4))
def test_brute_force_matches_event_enumeration(data, rows, cols):
    cells = data.draw(st.lists(st.integers(0, 9), min_size=rows * cols, max_size=rows * cols))
    assume(sum(cells) > 0)
    joint = np.array(cells, dtype=float).reshape(rows, cols)
    joint /= joint.sum()
    alpha, phi = definitional_alpha_phi(joint)
    assert 0.25 * brute_force_varpi(joint, math.inf, 1) == pytest.approx(alpha, abs=1e-12)
    assert 0.5 * brute_force_varpi(joint, math.inf, math.inf) == pytest.approx(phi, abs=1e-12)
    assert alpha <= phi + 1e-12
    rho = brute_force_varpi(joint, 2, 2)
    assert alpha <= rho / 4 + 1e-12
    assert rho <= 2 * math.sqrt(phi) + 1e-12


def test_interpolation_branches():
    assert interpolate_bound(MixingProfile(n=1, phi=np.array([0.0])), 3, 1).value == 0.0
    single = interpolate_bound(MixingProfile(n=1, phi=np.array([0.04])), 2, 1)
    assert single.value == pytest.approx(0.2)
    both = interpolate_bound(MixingProfile(n=1, phi=np.array([0.25]), rho=np.array([0.9])), 4, 1)
    assert both.value == pytest.approx(0.25**0.75)
    assert both.value == pytest.approx(0.35355, abs=1e-5)
    assert both.branch == "phi"


def test_interpolation_beyond_the_row():
    bound = interpolate_bound(MixingProfile(n=2, phi=np.array([0.5, 0.2])), 4, 3)
    assert bound.value == 0.0
    assert bound.branch == "zero"


def test_interpolation_needs_a_sequence():
    empty = SimpleNamespace(n=3, phi=None, rho=None)
    with pytest.raises(MissingDataError):
        interpolate_bound(empty, 4, 1)


def test_interpolation_monotone_in_q():
    rho_only = MixingProfile(n=1, rho=np.array([0.6]))
    phi_only = MixingProfile(n=1, phi=np.array([0.3]))
    qs = (2, 3, 4, 8)
    rho_values = [interpolate_bound(rho_only, q, 1).value for q in qs]
    phi_values = [interpolate_bound(phi_only, q, 1).value for q in qs]
    assert rho_values == sorted(rho_values)
    assert phi_values == sorted(phi_values, reverse=True)


def test_varpi_sum(geometric_chain):
    profile = exact_chain_profile(geometric_chain)
    total = varpi_sum(profile, 2.0)
    assert total == pytest.approx(1.0 + math.fsum(varpi_profile(profile, 2.0)))
    assert total < 3.0


def test_consistency_of_generated_profiles(elliptic_chain, biased_chain):
    assert consistency_check(dobrushin_phi_profile(elliptic_chain)) == []
    assert consistency_check(exact_chain_profile(biased_chain)) == []


def test_constructed_violation():
    bad = SimpleNamespace(alpha=np.array([0.5, 0.0]), phi=np.array([0.1, 0.0]), rho=None, model_id="bad")
    violations = consistency_check(bad)
    assert len(violations) == 1
    assert violations[0].lag == 1
    assert violations[0].inequality == "alpha<=phi"
