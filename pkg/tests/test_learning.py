import numpy as np
import pytest

from fpdcontrol import stationary_policy
from fpdcontrol.gaussian import ValidationError
from fpdcontrol.learning import LearningSchedule, learning_ensemble, learning_plan, learning_run
from fpdcontrol.simulate import derive_rng, run_ensemble_raw, simulate_trajectory


def test_shrinking_error_recovers_exact_loop(plant, ideal):
    plan = learning_plan(plant, ideal, LearningSchedule(0, 0.5, 0, 0.5, perturbation_seed=3), 100)
    assert np.max(np.abs(plan.rho[39:] - 0.78334575)) < 1e-3
    assert not plan.failed[39:].any()


def test_zero_error_is_stationary_controller(plant, ideal):
    run = learning_run(plant, ideal, LearningSchedule(), 50, [1.0], derive_rng(9, 0))
    ref = simulate_trajectory(plant, stationary_policy(plant, ideal), [1.0], derive_rng(9, 0), 50)
    np.testing.assert_array_equal(run.trajectory.states, ref.states)
    np.testing.assert_array_equal(run.trajectory.inputs, ref.inputs)


def test_zero_error_ensemble_matches_stationary(plant, ideal):
    _, stats = learning_ensemble(plant, ideal, LearningSchedule(), 30, [1.0], 500, seed=4)
    ref = run_ensemble_raw(plant, stationary_policy(plant, ideal), [1.0], 30, 500, 4)
    np.testing.assert_array_equal(stats.mean, ref.mean)
    np.testing.assert_array_equal(stats.cov, ref.cov)


def test_persistent_error_keeps_indicator_away(plant, ideal):
    plan = learning_plan(plant, ideal, LearningSchedule(eps3=0.5, perturbation_seed=1), 200)
    assert np.all(np.abs(plan.rho[~plan.failed] - 0.78334575) > 1e-3)


def test_failed_synthesis_steps_apply_zero_input(plant, ideal):
    # |b~ - b| = 0.04 exactly; direction sign decides whether b~ hits 0
    for seed in range(20):
        plan = learning_plan(plant, ideal, LearningSchedule(eps3=0.04, perturbation_seed=seed), 5)
        if plan.failed.any():
            k = int(np.flatnonzero(plan.failed)[0])
            assert np.isnan(plan.rho[k])
            assert not np.any(plan.steps[k].feedback_gain)
            run = learning_run(plant, ideal, LearningSchedule(eps3=0.04, perturbation_seed=seed), 5,
                               [1.0], derive_rng(0, 0))
            assert run.trajectory.inputs[k, 0] == 0.0
            return
    pytest.fail("no seed produced a zero design b")


def test_perturbations_are_seeded(plant, ideal):
    s = LearningSchedule(0.1, 0.5, 0.01, 0.5, perturbation_seed=7)
    a, b = learning_plan(plant, ideal, s, 20), learning_plan(plant, ideal, s, 20)
    np.testing.assert_array_equal(a.design_A, b.design_A)
    c = learning_plan(plant, ideal, LearningSchedule(0.1, 0.5, 0.01, 0.5, perturbation_seed=8), 20)
    assert not np.array_equal(a.design_A, c.design_A)
    radius = np.abs(a.design_A[:, 0, 0] - 1.27)
    np.testing.assert_allclose(radius, [0.1 + 0.5**t for t in range(1, 21)], rtol=1e-12)


@pytest.mark.parametrize("kw", [dict(eps1=-0.1), dict(eps2=1.0), dict(eps4=1.5)])
def test_schedule_validation(kw):
    with pytest.raises(ValidationError):
        LearningSchedule(**kw)
