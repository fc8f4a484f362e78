"""Infinite-horizon policy from the algebraic Riccati fixed point.

The controller only sees a design model ``(A~, B~)``; the plant it drives
may differ. The design noise covariance never enters synthesis and is
carried for simulation only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .finite import PolicyStep
from .gaussian import (
    IdealSpec,
    LinearGaussianModel,
    NumericalError,
    ValidationError,
    is_spd,
    spd_inv,
    spd_solve,
    spectral_radius,
    symmetrize,
)

RICCATI_TOL = 1e-12
RICCATI_MAX_ITER = 10**6
_BLOWUP = 1e150


class DesignModel(LinearGaussianModel):
    """The model the controller believes in; fields hold ``A~``, ``B~``, ``Sigma~``."""


@dataclass(frozen=True)
class StationaryPolicy:
    input_cov: np.ndarray
    gain: np.ndarray
    omega_cov_inv: np.ndarray
    gamma_cov_inv: np.ndarray

    def as_step(self) -> PolicyStep:
        return PolicyStep(self.gain, np.zeros(self.gain.shape[0]), self.input_cov)


def riccati_map(W: np.ndarray, A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    """One backward step ``Q + A^T (W - W B (R + B^T W B)^-1 B^T W) A``."""
    WB = W @ B
    inner = W - WB @ spd_solve(symmetrize(R + B.T @ WB), WB.T)
    return symmetrize(Q + A.T @ inner @ A)


def _check_zero_means(ideal: IdealSpec) -> None:
    if not ideal.has_zero_means:
        raise ValidationError("stationary synthesis requires zero ideal means")


def _scalar_value_iteration(a, b, q, r, tol, max_iter, history):
    w = q
    for _ in range(max_iter):
        w_next = q + a * a * w * r / (r + b * b * w)
        delta = abs(w_next - w)
        if history is not None:
            history.append(delta)
        w = w_next
        if not np.isfinite(w) or w > _BLOWUP:
            raise NumericalError("Riccati iteration diverged (design pair not stabilizable)")
        if delta <= tol * max(1.0, w):
            return w
    raise NumericalError(f"Riccati iteration did not converge in {max_iter} iterations")


def solve_riccati(
    design: LinearGaussianModel,
    ideal: IdealSpec,
    tol: float = RICCATI_TOL,
    max_iter: int = RICCATI_MAX_ITER,
    history: list | None = None,
) -> np.ndarray:
    """Fixed point ``W = inv(Sigma_omega)`` of the Riccati map, by value iteration.

    Starts from ``W0 = inv(ideal state cov)`` and stops once the max-abs
    update falls below ``tol * max(1, max|W|)``. If ``history`` is a list,
    the per-iteration update norms are appended to it.

    Raises
    ------
    NumericalError
        The iterates blow up or fail to settle within ``max_iter``.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    _check_zero_means(ideal)
    ideal.check_against(design)
    A, B = design.A, design.B
    Q = spd_inv(ideal.state_cov)
    R = spd_inv(ideal.input_cov)

    if design.n == 1 and design.m == 1:
        w = _scalar_value_iteration(
            float(A[0, 0]), float(B[0, 0]), float(Q[0, 0]), float(R[0, 0]), tol, max_iter, history
        )
        return np.array([[w]])

    W = Q.copy()
    for _ in range(max_iter):
        W_next = riccati_map(W, A, B, Q, R)
        delta = float(np.max(np.abs(W_next - W)))
        if history is not None:
            history.append(delta)
        W = W_next
        scale = float(np.max(np.abs(W)))
        if not np.isfinite(scale) or scale > _BLOWUP:
            raise NumericalError("Riccati iteration diverged (design pair not stabilizable)")
        if delta <= tol * max(1.0, scale):
            if not is_spd(W):
                raise NumericalError("Riccati fixed point is not positive definite")
            return W
    raise NumericalError(f"Riccati iteration did not converge in {max_iter} iterations")


def scalar_riccati_root(a: float, b: float, state_var: float, input_var: float) -> float:
    """Positive root of ``b^2 w^2 + (r - q b^2 - a^2 r) w - q r = 0``.

    Closed form of the scalar fixed point with ``q = 1/state_var`` and
    ``r = 1/input_var``; used as an independent check on value iteration.
    """
    q, r = 1.0 / state_var, 1.0 / input_var
    if b == 0.0:
        if abs(a) >= 1.0:
            raise NumericalError("no positive fixed point for an uncontrollable unstable plant")
        return q / (1.0 - a * a)
    c2 = b * b
    c1 = r - q * b * b - a * a * r
    c0 = -q * r
    return (-c1 + np.sqrt(c1 * c1 - 4.0 * c2 * c0)) / (2.0 * c2)


def policy_from_precision(design: LinearGaussianModel, ideal: IdealSpec, W: np.ndarray) -> StationaryPolicy:
    B = design.B
    R = spd_inv(ideal.input_cov)
    u_cov = spd_inv(symmetrize(R + B.T @ W @ B))
    gain = -u_cov @ B.T @ W @ design.A
    gamma = symmetrize(W - W @ B @ u_cov @ B.T @ W)
    return StationaryPolicy(u_cov, gain, W, gamma)


def stationary_policy(
    design: LinearGaussianModel,
    ideal: IdealSpec,
    tol: float = RICCATI_TOL,
    max_iter: int = RICCATI_MAX_ITER,
) -> StationaryPolicy:
    """Stationary randomized law ``u ~ N(gain @ x, input_cov)`` for the design model."""
    W = solve_riccati(design, ideal, tol=tol, max_iter=max_iter)
    return policy_from_precision(design, ideal, W)


def mismatch_closed_loop(
    true_model: LinearGaussianModel, design: LinearGaussianModel, policy: StationaryPolicy
) -> np.ndarray:
    """``A + B @ gain``: the true plant under the design-model policy."""
    if true_model.A.shape != design.A.shape or true_model.B.shape != design.B.shape:
        raise ValidationError("true and design models have different dimensions")
    if policy.gain.shape != (true_model.m, true_model.n):
        raise ValidationError("policy gain does not match the model dimensions")
    return true_model.A + true_model.B @ policy.gain


def stationary_state_cov(
    true_model: LinearGaussianModel,
    design: LinearGaussianModel,
    policy: StationaryPolicy,
    tol: float = 1e-12,
    max_iter: int = RICCATI_MAX_ITER,
) -> np.ndarray:
    """Fixed point of ``S = noise + B Sigma_u B^T + K S K^T`` by iteration."""
    K = mismatch_closed_loop(true_model, design, policy)
    if spectral_radius(K) >= 1.0:
        raise NumericalError("closed loop is unstable; no stationary covariance")
    B = true_model.B
    C = symmetrize(true_model.noise_cov + B @ policy.input_cov @ B.T)
    S = C.copy()
    for _ in range(max_iter):
        S_next = symmetrize(C + K @ S @ K.T)
        delta = float(np.max(np.abs(S_next - S)))
        S = S_next
        if delta <= tol * max(1.0, float(np.max(np.abs(S)))):
            return S
    raise NumericalError("stationary covariance iteration did not converge")
