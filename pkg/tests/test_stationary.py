import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from fpdcontrol import IdealSpec, LinearGaussianModel, synthesize_finite
from fpdcontrol.gaussian import NumericalError, ValidationError
from fpdcontrol.stationary import (
    DesignModel,
    mismatch_closed_loop,
    riccati_map,
    scalar_riccati_root,
    solve_riccati,
    stationary_policy,
    stationary_state_cov,
)
from tests.conftest import random_spd, random_system
from tests.oracles import scalar_quadratic_root

W_EXACT = 970.704528105029
W_MISMATCH = 3843.7550705758335


@pytest.mark.parametrize("b, frozen", [(0.04, W_EXACT), (0.02, W_MISMATCH)])
def test_scalar_root_against_quadratic(ideal, b, frozen):
    # q = 1/0.2 = 5, r = 1/0.4 = 2.5
    oracle = scalar_quadratic_root(1.27, b, 5.0, 2.5)
    W = solve_riccati(DesignModel(1.27, b, 0.6), ideal)[0, 0]
    assert oracle == pytest.approx(frozen, rel=1e-12)
    assert W == pytest.approx(oracle, rel=1e-9)
    assert scalar_riccati_root(1.27, b, 0.2, 0.4) == pytest.approx(oracle, rel=1e-12)


def test_scalar_policy_values(plant, ideal, mismatch_design):
    pol = stationary_policy(plant, ideal)
    assert pol.input_cov[0, 0] == pytest.approx(0.24672307074531, rel=1e-10)
    assert pol.gain[0, 0] == pytest.approx(-12.166356259590916, rel=1e-10)
    mis = stationary_policy(mismatch_design, ideal)
    assert mis.gain[0, 0] == pytest.approx(-24.181134302839897, rel=1e-10)
    K = mismatch_closed_loop(plant, mismatch_design, mis)
    assert K[0, 0] == pytest.approx(0.30275462788640406, rel=1e-10)


def test_zero_design_A_gives_zero_gain(ideal):
    pol = stationary_policy(DesignModel(0.0, 0.04, 0.6), ideal)
    assert pol.gain[0, 0] == 0.0
    np.testing.assert_allclose(pol.omega_cov_inv, [[5.0]], rtol=1e-14)


def test_no_authority_stable_plant(ideal):
    W = solve_riccati(DesignModel(0.5, 0.0, 1.0), ideal)
    assert W[0, 0] == pytest.approx(5.0 / (1 - 0.25), rel=1e-10)


def test_no_authority_unstable_plant_diverges(ideal):
    with pytest.raises(NumericalError):
        solve_riccati(DesignModel(1.27, 0.0, 0.6), ideal)


def test_nonzero_means_rejected():
    ideal = IdealSpec([1.0], 0.2, [0.0], 0.4)
    with pytest.raises(ValidationError):
        solve_riccati(DesignModel(1.27, 0.04, 0.6), ideal)


def test_finite_gain_converges_to_stationary(plant, ideal):
    pol = stationary_policy(plant, ideal)
    _, steps = synthesize_finite(plant, ideal, 300)
    assert steps[0].feedback_gain[0, 0] == pytest.approx(pol.gain[0, 0], rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4))
def test_dare_matches_scipy(seed, n, m):
    rng = np.random.default_rng(seed)
    A, B = random_system(rng, n, m)
    Sx, Su = random_spd(rng, n, 0.5), random_spd(rng, m, 0.5)
    Q, R = np.linalg.inv(Sx), np.linalg.inv(Su)
    ref = scipy.linalg.solve_discrete_are(A, B, Q, R)
    W = solve_riccati(LinearGaussianModel(A, B, np.eye(n)), IdealSpec.zero_mean(Sx, Su))
    np.testing.assert_allclose(W, ref, rtol=1e-7, atol=1e-8 * np.abs(ref).max())
    resid = riccati_map(W, A, B, Q, R) - W
    assert np.abs(resid).max() <= 1e-9 * max(1.0, np.abs(W).max())


def test_stationary_policy_is_limit_of_finite_recursion():
    rng = np.random.default_rng(5)
    A, B = random_system(rng, 3, 2)
    ideal = IdealSpec.zero_mean(random_spd(rng, 3), random_spd(rng, 2))
    model = LinearGaussianModel(A, B, np.eye(3))
    pol = stationary_policy(model, ideal)
    bp, steps = synthesize_finite(model, ideal, 400)
    np.testing.assert_allclose(steps[0].feedback_gain, pol.gain, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(steps[0].input_cov, pol.input_cov, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(bp.gamma_cov_inv[0], pol.gamma_cov_inv, rtol=1e-7, atol=1e-8)


def test_value_iteration_tail_is_monotone(plant, ideal):
    hist = []
    solve_riccati(plant, ideal, history=hist)
    tail = np.array(hist[len(hist) // 2:])
    tail = tail[tail > 1e-13 * W_EXACT]
    assert np.all(np.diff(tail) <= 0)


def test_stationary_state_cov_matches_lyapunov():
    rng = np.random.default_rng(3)
    A, B = random_system(rng, 3, 2)
    ideal = IdealSpec.zero_mean(random_spd(rng, 3), random_spd(rng, 2))
    model = LinearGaussianModel(A, B, random_spd(rng, 3))
    pol = stationary_policy(model, ideal)
    K = A + B @ pol.gain
    C = model.noise_cov + B @ pol.input_cov @ B.T
    ref = scipy.linalg.solve_discrete_lyapunov(K, C)
    np.testing.assert_allclose(stationary_state_cov(model, model, pol), ref, rtol=1e-9)


def test_scalar_stationary_variance(plant, ideal, mismatch_design):
    pol = stationary_policy(plant, ideal)
    assert stationary_state_cov(plant, plant, pol)[0, 0] == pytest.approx(1.553939572089053, rel=1e-10)
    mis = stationary_policy(mismatch_design, ideal)
    assert stationary_state_cov(plant, mismatch_design, mis)[0, 0] == pytest.approx(0.6609821495202501, rel=1e-10)


def test_unstable_loop_has_no_stationary_covariance(ideal):
    design = DesignModel(1.27, 0.5, 0.6)
    pol = stationary_policy(design, ideal)
    true = LinearGaussianModel(1.27, 0.001, 0.6)
    with pytest.raises(NumericalError):
        stationary_state_cov(true, design, pol)


def test_dimension_mismatch(plant, ideal):
    pol = stationary_policy(plant, ideal)
    big = LinearGaussianModel(np.eye(2), np.ones((2, 1)), np.eye(2))
    with pytest.raises(ValidationError):
        mismatch_closed_loop(big, plant, pol)
