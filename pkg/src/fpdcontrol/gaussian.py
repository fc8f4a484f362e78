"""Gaussian densities, linear-Gaussian models and small dense linear algebra.

Every other module trades in the types defined here. Matrices are plain
``numpy`` arrays, always promoted to 2-D so that scalar systems and
matrix systems share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

SYM_TOL = 1e-10


class ValidationError(ValueError):
    """Inputs violate a dimension or definiteness contract."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed (non-convergence, loss of definiteness)."""


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def as_vector(value, name: str = "vector") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float)).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def is_spd(mat: np.ndarray, tol: float = SYM_TOL) -> bool:
    """Symmetric within ``tol`` and Cholesky-factorizable."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        return False
    if np.max(np.abs(mat - mat.T), initial=0.0) > tol:
        return False
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return False
    return True


def check_spd(mat, name: str = "covariance") -> np.ndarray:
    mat = as_matrix(mat, name)
    if mat.shape[0] != mat.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {mat.shape}")
    if np.max(np.abs(mat - mat.T), initial=0.0) > SYM_TOL:
        raise ValidationError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise ValidationError(f"{name} is not positive definite") from None
    return mat


def check_psd(mat, name: str = "matrix", tol: float = 1e-9) -> np.ndarray:
    mat = as_matrix(mat, name)
    if np.max(np.abs(mat - mat.T), initial=0.0) > SYM_TOL * max(1.0, np.abs(mat).max()):
        raise NumericalError(f"{name} lost symmetry")
    eig = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    if eig.min(initial=0.0) < -tol * max(1.0, np.abs(eig).max(initial=0.0)):
        raise NumericalError(f"{name} is not positive semidefinite")
    return mat


def symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def spd_solve(spd: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``spd @ X = rhs`` through a Cholesky factorization."""
    try:
        factor = la.cho_factor(spd, lower=True, check_finite=False)
    except la.LinAlgError:
        raise NumericalError("matrix is not positive definite") from None
    return la.cho_solve(factor, rhs, check_finite=False)


def spd_inv(spd: np.ndarray) -> np.ndarray:
    return symmetrize(spd_solve(spd, np.eye(spd.shape[0])))


def spectral_radius(mat) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    mat = np.asarray(mat, dtype=float)
    mat = np.atleast_2d(mat) if mat.ndim < 2 else mat
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError(f"spectral radius needs a square matrix, got {mat.shape}")
    if mat.shape[0] == 1:
        return float(abs(mat[0, 0]))
    return float(np.max(np.abs(np.linalg.eigvals(mat))))


@dataclass(frozen=True)
class GaussianDensity:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = as_vector(self.mean, "mean")
        cov = check_spd(self.covariance, "covariance")
        if cov.shape[0] != mean.size:
            raise ValidationError(
                f"mean has length {mean.size} but covariance is {cov.shape}"
            )
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "covariance", _frozen(cov))

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.covariance)


@dataclass(frozen=True)
class LinearGaussianModel:
    """``x_t = A x_{t-1} + B u_t + xi_t`` with ``xi_t ~ N(0, noise_cov)``."""

    A: np.ndarray
    B: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValidationError(f"A must be square, got {A.shape}")
        B = as_matrix(self.B, "B")
        if B.shape[0] != n:
            # a 1-D B given for a single-input system arrives as a row
            if B.shape[0] == 1 and B.shape[1] == n:
                B = B.T
            else:
                raise ValidationError(f"B has {B.shape[0]} rows, A has {n}")
        noise = check_spd(self.noise_cov, "noise_cov")
        if noise.shape != (n, n):
            raise ValidationError(f"noise_cov must be {n}x{n}, got {noise.shape}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "noise_cov", _frozen(noise))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def replace(self, **changes) -> "LinearGaussianModel":
        fields = {"A": self.A, "B": self.B, "noise_cov": self.noise_cov}
        fields.update(changes)
        return type(self)(**fields)


@dataclass(frozen=True)
class IdealSpec:
    """Ideal (target) Gaussians for the state and the input."""

    state_mean: np.ndarray
    state_cov: np.ndarray
    input_mean: np.ndarray
    input_cov: np.ndarray

    def __post_init__(self):
        xs = check_spd(self.state_cov, "ideal state_cov")
        us = check_spd(self.input_cov, "ideal input_cov")
        xm = as_vector(self.state_mean, "ideal state_mean")
        um = as_vector(self.input_mean, "ideal input_mean")
        if xm.size != xs.shape[0]:
            raise ValidationError("ideal state_mean / state_cov dimension mismatch")
        if um.size != us.shape[0]:
            raise ValidationError("ideal input_mean / input_cov dimension mismatch")
        for name, val in (("state_mean", xm), ("state_cov", xs),
                          ("input_mean", um), ("input_cov", us)):
            object.__setattr__(self, name, _frozen(val))

    @classmethod
    def zero_mean(cls, state_cov, input_cov) -> "IdealSpec":
        xs = as_matrix(state_cov)
        us = as_matrix(input_cov)
        return cls(np.zeros(xs.shape[0]), xs, np.zeros(us.shape[0]), us)

    @property
    def has_zero_means(self) -> bool:
        return not (np.any(self.state_mean) or np.any(self.input_mean))

    def check_against(self, model: LinearGaussianModel) -> None:
        if self.state_cov.shape[0] != model.n:
            raise ValidationError(
                f"ideal state dimension {self.state_cov.shape[0]} != model n={model.n}"
            )
        if self.input_cov.shape[0] != model.m:
            raise ValidationError(
                f"ideal input dimension {self.input_cov.shape[0]} != model m={model.m}"
            )


def kl_gaussian(p: GaussianDensity, q: GaussianDensity) -> float:
    """KL divergence ``D(p || q)`` between two multivariate normals.

    Uses ``0.5 * (ln|Sq|/|Sp| - n + tr(Sq^-1 Sp) + d^T Sq^-1 d)`` with
    ``d = mu_p - mu_q``; log-determinants come from Cholesky diagonals.
    """
    if p.dim != q.dim:
        raise ValidationError(f"dimension mismatch: {p.dim} vs {q.dim}")
    lp = np.linalg.cholesky(p.covariance)
    lq = np.linalg.cholesky(q.covariance)
    logdet_p = 2.0 * np.sum(np.log(np.diag(lp)))
    logdet_q = 2.0 * np.sum(np.log(np.diag(lq)))
    # tr(Sq^-1 Sp) = ||Lq^-1 Lp||_F^2
    w = la.solve_triangular(lq, lp, lower=True)
    diff = la.solve_triangular(lq, p.mean - q.mean, lower=True)
    kl = 0.5 * (logdet_q - logdet_p - p.dim + np.sum(w * w) + diff @ diff)
    return float(max(kl, 0.0)) if kl > -1e-12 else float(kl)


def sample_gaussian(g: GaussianDensity, rng: np.random.Generator, size: int | None = None):
    """Draw ``mu + L z`` with ``L`` the lower Cholesky factor of the covariance."""
    z = rng.standard_normal(g.dim if size is None else (size, g.dim))
    return g.mean + z @ g.chol.T
