"""Finite-horizon KL-optimal policy synthesis for linear-Gaussian plants.

The backward sweep produces, for every step ``t = 1..T``, a Gaussian input
law ``u_t ~ N(F_t x_{t-1} + g_t, Sigma_{t,u})``. With zero ideal means the
sweep is the LQR Riccati difference equation with ``Q = inv(ideal state
cov)`` and ``R = inv(ideal input cov)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gaussian import (
    GaussianDensity,
    IdealSpec,
    LinearGaussianModel,
    NumericalError,
    ValidationError,
    as_matrix,
    as_vector,
    check_psd,
    check_spd,
    is_spd,
    spd_inv,
    spd_solve,
    symmetrize,
)


@dataclass(frozen=True)
class PolicyStep:
    """One step of the randomized law: ``u ~ N(F x + g, input_cov)``."""

    feedback_gain: np.ndarray
    affine_offset: np.ndarray
    input_cov: np.ndarray

    def mean_input(self, x: np.ndarray) -> np.ndarray:
        return self.feedback_gain @ x + self.affine_offset


@dataclass(frozen=True)
class BackwardPass:
    """Backward-sweep quantities, stacked along axis 0 with row ``k`` for ``t = k+1``.

    ``L``, ``M`` and ``gamma_cov_inv`` describe the quadratic exponent of the
    normalizer passed back from step ``t``; ``omega_cov``/``omega_mean`` the
    Gaussian completed at step ``t``. ``omega_cov_inv`` is kept alongside
    since the gains need it directly.
    """

    L: np.ndarray
    M: np.ndarray
    gamma_cov_inv: np.ndarray
    omega_cov: np.ndarray
    omega_cov_inv: np.ndarray
    omega_mean: np.ndarray

    @property
    def horizon(self) -> int:
        return self.L.shape[0]


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # (T+1, n): x_0..x_T
    inputs: np.ndarray  # (T, m): u_1..u_T

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1)
        if states.shape[0] != inputs.shape[0] + 1:
            raise ValidationError(
                f"{states.shape[0]} states need {states.shape[0] - 1} inputs, got {inputs.shape[0]}"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]


def synthesize_finite(
    model: LinearGaussianModel, ideal: IdealSpec, horizon: int
) -> tuple[BackwardPass, list[PolicyStep]]:
    """Backward recursion for the optimal randomized policy over ``horizon`` steps.

    Returns the backward-pass record and the policy steps ``t = 1..horizon``
    in forward order.

    Raises
    ------
    ValidationError
        Dimension mismatch or a non-positive horizon.
    NumericalError
        An intermediate covariance lost definiteness.
    """
    if int(horizon) != horizon or horizon < 1:
        raise ValidationError(f"horizon must be a positive integer, got {horizon}")
    horizon = int(horizon)
    ideal.check_against(model)
    A, B = model.A, model.B
    n, m = model.n, model.m

    Q = spd_inv(ideal.state_cov)
    R = spd_inv(ideal.input_cov)
    Q_mu = Q @ ideal.state_mean
    R_mu = R @ ideal.input_mean
    ideal_u_cov = ideal.input_cov

    Ls = np.zeros((horizon, n, n))
    Ms = np.zeros((horizon, n))
    gammas = np.zeros((horizon, n, n))
    om_covs = np.zeros((horizon, n, n))
    om_invs = np.zeros((horizon, n, n))
    om_means = np.zeros((horizon, n))
    steps: list[PolicyStep] = [None] * horizon  # type: ignore[list-item]

    # terminal clauses: L = 0, M = 0, Gamma = 0 at t = T
    L = np.zeros((n, n))
    M = np.zeros(n)
    gamma_inv = np.zeros((n, n))
    for k in range(horizon - 1, -1, -1):
        W = symmetrize(Q + L.T @ gamma_inv @ L)
        if not is_spd(W):
            raise NumericalError(f"omega precision lost definiteness at t={k + 1}")
        om_cov = spd_inv(W)
        om_mean = om_cov @ (Q_mu - L.T @ gamma_inv @ M)

        u_prec = symmetrize(R + B.T @ W @ B)
        u_cov = spd_inv(u_prec)
        F = -u_cov @ (B.T @ W @ A)
        g = u_cov @ (R_mu + B.T @ W @ om_mean)

        Ls[k], Ms[k], gammas[k] = L, M, gamma_inv
        om_covs[k], om_invs[k], om_means[k] = om_cov, W, om_mean
        steps[k] = PolicyStep(F, g, u_cov)

        # quantities handed back to step t-1
        gamma_inv = spd_inv(symmetrize(B @ ideal_u_cov @ B.T + om_cov))
        M = B @ ideal.input_mean - om_mean
        L = A

    for k in range(horizon):
        check_psd(gammas[k], f"gamma precision at t={k + 1}")
        check_spd(om_covs[k], f"omega covariance at t={k + 1}")

    bp = BackwardPass(Ls, Ms, gammas, om_covs, om_invs, om_means)
    return bp, steps


def closed_loop_moment_arrays(
    model: LinearGaussianModel,
    policy: Sequence[PolicyStep],
    x0_mean,
    x0_cov,
    horizon: int,
) -> tuple[np.ndarray, np.ndarray]:
    """State means ``(T+1, n)`` and covariances ``(T+1, n, n)``, row 0 being ``x_0``."""
    if len(policy) < horizon:
        raise ValidationError(f"policy has {len(policy)} steps, need {horizon}")
    A, B = model.A, model.B
    mu = as_vector(x0_mean, "x0_mean")
    cov = as_matrix(x0_cov, "x0_cov")
    if mu.size != model.n or cov.shape != (model.n, model.n):
        raise ValidationError("initial moments do not match the model dimension")
    means = np.empty((horizon + 1, model.n))
    covs = np.empty((horizon + 1, model.n, model.n))
    means[0], covs[0] = mu, cov
    for k in range(horizon):
        step = policy[k]
        K = A + B @ step.feedback_gain
        mu = K @ mu + B @ step.affine_offset
        cov = symmetrize(model.noise_cov + K @ cov @ K.T + B @ step.input_cov @ B.T)
        means[k + 1], covs[k + 1] = mu, cov
    return means, covs


def closed_loop_moments(
    model: LinearGaussianModel,
    policy: Sequence[PolicyStep],
    x0_mean,
    x0_cov,
    horizon: int,
) -> list[GaussianDensity]:
    """Gaussian law of ``x_t`` for ``t = 1..horizon`` under the given policy."""
    means, covs = closed_loop_moment_arrays(model, policy, x0_mean, x0_cov, horizon)
    return [GaussianDensity(means[t], covs[t]) for t in range(1, horizon + 1)]


def stability_matrix(model: LinearGaussianModel, step: PolicyStep, omega_cov) -> np.ndarray:
    """``A - B Sigma_u B^T inv(omega_cov) A``."""
    omega_cov = as_matrix(omega_cov, "omega_cov")
    if omega_cov.shape != (model.n, model.n):
        raise ValidationError("omega_cov does not match the model dimension")
    B = model.B
    if step.input_cov.shape != (model.m, model.m):
        raise ValidationError("policy input covariance does not match the model")
    return model.A - B @ step.input_cov @ B.T @ spd_solve(omega_cov, model.A)


def lqr_cost(trajectory: Trajectory, ideal: IdealSpec) -> float:
    """Quadratic cost with ``Q = inv(ideal state cov)``, ``R = inv(ideal input cov)``.

    Running cost pairs ``x_k`` with ``u_{k+1}`` for ``k = 0..T-1``; the terminal
    term weighs ``x_T``.
    """
    Q = spd_inv(ideal.state_cov)
    R = spd_inv(ideal.input_cov)
    xs, us = trajectory.states, trajectory.inputs
    running = np.einsum("ti,ij,tj->", xs[:-1], Q, xs[:-1]) + np.einsum("ti,ij,tj->", us, R, us)
    terminal = xs[-1] @ Q @ xs[-1]
    return float(running + terminal)
