"""Certainty-equivalence control while the model is being learned.

At step ``t`` the controller holds ``A~_t = A + (e1 + e2**t) D_t`` and
``B~_t = B + (e3 + e4**t) E_t`` with ``D_t``, ``E_t`` seeded directions of
unit spectral norm, synthesizes the stationary policy for that pair as if it
were exact and permanent, and applies one step of it to the true plant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .finite import PolicyStep, Trajectory
from .gaussian import IdealSpec, LinearGaussianModel, NumericalError, ValidationError, spectral_radius
from .simulate import EnsembleStats, derive_rng, run_ensemble_raw, simulate_trajectory
from .stationary import DesignModel, stationary_policy


@dataclass(frozen=True)
class LearningSchedule:
    eps1: float = 0.0
    eps2: float = 0.0
    eps3: float = 0.0
    eps4: float = 0.0
    perturbation_seed: int = 0

    def __post_init__(self):
        for name in ("eps1", "eps2", "eps3", "eps4"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        if not (self.eps2 < 1 and self.eps4 < 1):
            raise ValidationError("eps2 and eps4 must be smaller than one")

    def radius_A(self, t: int) -> float:
        return self.eps1 + self.eps2**t

    def radius_B(self, t: int) -> float:
        return self.eps3 + self.eps4**t


def _unit_direction(rng: np.random.Generator, shape) -> np.ndarray:
    D = rng.standard_normal(shape)
    return D / np.linalg.norm(D, 2)


@dataclass(frozen=True)
class LearningPlan:
    """Per-step certainty-equivalence policies; ``failed[k]`` marks step ``k+1`` skipped."""

    steps: list
    rho: np.ndarray
    failed: np.ndarray
    design_A: np.ndarray
    design_B: np.ndarray


def learning_plan(
    true_model: LinearGaussianModel, ideal: IdealSpec, schedule: LearningSchedule, horizon: int
) -> LearningPlan:
    """Design pairs, policies and instantaneous closed-loop radii for ``t = 1..horizon``.

    A step whose design pair has no Riccati solution applies zero input and
    records ``rho = nan``.
    """
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    rng = derive_rng(schedule.perturbation_seed, 0)
    A, B = true_model.A, true_model.B
    n, m = true_model.n, true_model.m
    steps, rho, failed, dAs, dBs = [], np.empty(horizon), np.zeros(horizon, bool), [], []
    for t in range(1, horizon + 1):
        dA = A + schedule.radius_A(t) * _unit_direction(rng, A.shape)
        dB = B + schedule.radius_B(t) * _unit_direction(rng, B.shape)
        dAs.append(dA)
        dBs.append(dB)
        try:
            pol = stationary_policy(DesignModel(dA, dB, true_model.noise_cov), ideal)
        except NumericalError:
            steps.append(PolicyStep(np.zeros((m, n)), np.zeros(m), np.zeros((m, m))))
            rho[t - 1] = np.nan
            failed[t - 1] = True
            continue
        steps.append(pol.as_step())
        rho[t - 1] = spectral_radius(A + B @ pol.gain)
    return LearningPlan(steps, rho, failed, np.array(dAs), np.array(dBs))


@dataclass(frozen=True)
class LearningRun:
    trajectory: Trajectory
    rho: np.ndarray
    failed: np.ndarray


def learning_run(
    true_model: LinearGaussianModel,
    ideal: IdealSpec,
    schedule: LearningSchedule,
    horizon: int,
    x0,
    rng: np.random.Generator,
) -> LearningRun:
    plan = learning_plan(true_model, ideal, schedule, horizon)
    traj = simulate_trajectory(true_model, plan.steps, x0, rng, horizon)
    return LearningRun(traj, plan.rho, plan.failed)


def learning_ensemble(
    true_model: LinearGaussianModel,
    ideal: IdealSpec,
    schedule: LearningSchedule,
    horizon: int,
    x0,
    runs: int,
    seed: int,
    workers: int = 1,
) -> tuple[LearningPlan, EnsembleStats]:
    """Same learning sequence for every run; process and input noise vary per run."""
    plan = learning_plan(true_model, ideal, schedule, horizon)
    stats = run_ensemble_raw(true_model, plan.steps, x0, horizon, runs, seed, workers=workers)
    return plan, stats
