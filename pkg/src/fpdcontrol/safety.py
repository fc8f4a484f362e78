"""(M, delta)-safety of the closed loop as a function of the design model.

A design point is safe when ``P(||x_t|| > M ||x_0||) < delta`` for every
``t = 1..t_max``. Under a stationary policy ``x_t`` is exactly Gaussian, so
scalar systems use the normal CDF; larger systems sample the Gaussian law
of ``x_t`` with one fixed batch of standard normals reused at every ``t``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from .gaussian import (
    IdealSpec,
    LinearGaussianModel,
    NumericalError,
    ValidationError,
    as_vector,
    spectral_radius,
    symmetrize,
)
from .regions import (
    SYNTH_FAIL,
    ParamSlice2D,
    RegionGrid,
    SynthesisFailure,
    cached_policy,
)
from .simulate import derive_rng
from .stationary import StationaryPolicy, mismatch_closed_loop, stationary_state_cov

SAFE, UNSAFE = "safe", "unsafe"
DEFAULT_SAMPLES = 100_000
STATIONARY_TOL = 1e-6


class SafetyEstimate(NamedTuple):
    probability: float
    stderr: float  # 0 for the exact scalar path
    method: str


class HorizonTooShort(NumericalError):
    """Moments at ``t_max`` are not yet within tolerance of the stationary law."""


def _check_inputs(x0, M):
    if not M > 0:
        raise ValidationError(f"M must be positive, got {M}")
    x0 = as_vector(x0, "x0")
    if not np.any(x0):
        raise ValidationError("x0 must be non-zero")
    return x0


def state_moments(true_model: LinearGaussianModel, policy: StationaryPolicy, x0, t_max: int):
    """Means ``(t_max+1, n)`` and covariances of ``x_t`` from a deterministic ``x_0``."""
    K = true_model.A + true_model.B @ policy.gain
    C = symmetrize(true_model.noise_cov + true_model.B @ policy.input_cov @ true_model.B.T)
    n = true_model.n
    if n == 1:
        return _scalar_moments(float(K[0, 0]), float(C[0, 0]), float(np.ravel(x0)[0]), t_max)
    means = np.empty((t_max + 1, n))
    covs = np.empty((t_max + 1, n, n))
    mu, S = np.asarray(x0, dtype=float), np.zeros((n, n))
    means[0], covs[0] = mu, S
    # unstable loops may overflow over long horizons; callers treat inf as divergence
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, t_max + 1):
            mu = K @ mu
            S = symmetrize(C + K @ S @ K.T)
            means[t], covs[t] = mu, S
    return means, covs


def _scalar_moments(k: float, c: float, x0: float, t_max: int):
    """Closed form of the scalar recursions ``mu_t = k mu_{t-1}``, ``v_t = c + k^2 v_{t-1}``."""
    t = np.arange(t_max + 1, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        means = x0 * k**t
        k2 = k * k
        var = c * t if k2 == 1.0 else c * (1.0 - k2**t) / (1.0 - k2)
    return means[:, None], var[:, None, None]


def _scalar_tail(mu, var, c):
    """``P(|X| > c)`` for ``X ~ N(mu, var)``; a point mass when ``var == 0``."""
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    sd = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = ndtr((-c - mu) / sd) + ndtr((mu - c) / sd)
    return np.where(var > 0, p, (np.abs(mu) > c).astype(float))


def _scalar_mean_abs(mu, var):
    """``E|X|`` for ``X ~ N(mu, var)`` (folded normal mean)."""
    mu = np.asarray(mu, dtype=float)
    sd = np.sqrt(np.asarray(var, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = sd * math.sqrt(2 / math.pi) * np.exp(-0.5 * (mu / sd) ** 2) + mu * (1 - 2 * ndtr(-mu / sd))
    return np.where(sd > 0, val, np.abs(mu))


def _mc_tail(mean, cov, c, z):
    L = np.linalg.cholesky(cov) if np.any(cov) else np.zeros_like(cov)
    norms = np.linalg.norm(mean + z @ L.T, axis=1)
    hits = norms > c
    p = float(hits.mean())
    return p, math.sqrt(p * (1 - p) / z.shape[0]), float(norms.mean())


def safety_probability(
    true_model: LinearGaussianModel,
    design: LinearGaussianModel,
    policy: StationaryPolicy,
    x0,
    M: float,
    t: int,
    method: str = "auto",
    samples: int = DEFAULT_SAMPLES,
    rng: np.random.Generator | None = None,
) -> SafetyEstimate:
    """``P(||x_t|| > M ||x_0||)`` when the design-model policy drives the true plant.

    ``method`` is ``"exact"`` (scalar only), ``"monte_carlo"`` or ``"auto"``
    (exact for ``n == 1``).
    """
    x0 = _check_inputs(x0, M)
    if t < 0:
        raise ValidationError("t must be >= 0")
    mismatch_closed_loop(true_model, design, policy)  # dimension checks
    c = M * float(np.linalg.norm(x0))
    means, covs = state_moments(true_model, policy, x0, t)
    if method == "auto":
        method = "exact" if true_model.n == 1 else "monte_carlo"
    if method == "exact":
        if true_model.n != 1:
            raise ValidationError("exact safety probability is only available for scalar systems")
        p = float(_scalar_tail(means[t, 0], covs[t, 0, 0], c))
        return SafetyEstimate(p, 0.0, "exact")
    if method != "monte_carlo":
        raise ValidationError(f"unknown method {method!r}")
    if rng is None:
        raise ValidationError("monte_carlo needs an rng")
    z = rng.standard_normal((samples, true_model.n))
    p, se, _ = _mc_tail(means[t], covs[t], c, z)
    return SafetyEstimate(p, se, "monte_carlo")


def safety_sup(
    true_model: LinearGaussianModel,
    design: LinearGaussianModel,
    policy: StationaryPolicy,
    x0,
    M: float,
    t_max: int,
    samples: int = DEFAULT_SAMPLES,
    rng: np.random.Generator | None = None,
) -> tuple[float, float, float]:
    """``(rho, sup_t P(||x_t|| > M||x_0||), max_t E||x_t||)`` over ``t = 1..t_max``.

    Unstable loops report a sup probability of 1 (its limit). Stable loops
    must be stationary to within ``1e-6`` by ``t_max``, else
    :class:`HorizonTooShort`.
    """
    x0 = _check_inputs(x0, M)
    if t_max < 1:
        raise ValidationError("t_max must be >= 1")
    K = mismatch_closed_loop(true_model, design, policy)
    rho = spectral_radius(K)
    c = M * float(np.linalg.norm(x0))
    means, covs = state_moments(true_model, policy, x0, t_max)
    if rho < 1.0:
        S_inf = stationary_state_cov(true_model, design, policy)
        drift = max(float(np.max(np.abs(means[-1]))), float(np.max(np.abs(covs[-1] - S_inf))))
        if drift > STATIONARY_TOL:
            raise HorizonTooShort(f"t_max={t_max} leaves moments {drift:.2e} from stationary")
    if true_model.n == 1:
        probs = _scalar_tail(means[1:, 0], covs[1:, 0, 0], c)
        norms = _scalar_mean_abs(means[1:, 0], covs[1:, 0, 0])
        sup_p = float(np.nanmax(probs, initial=0.0))
        max_norm = float(np.nanmax(norms, initial=0.0)) if rho < 1.0 else float(np.max(np.abs(means[1:, 0])))
    else:
        if rng is None:
            raise ValidationError("multivariate safety needs an rng")
        z = rng.standard_normal((samples, true_model.n))
        sup_p, max_norm = 0.0, 0.0
        for t in range(1, t_max + 1):
            p, _, mn = _mc_tail(means[t], covs[t], c, z)
            sup_p, max_norm = max(sup_p, p), max(max_norm, mn)
    if rho >= 1.0:
        sup_p = 1.0
    return rho, sup_p, max_norm


def safety_region(
    slc: ParamSlice2D,
    true_model: LinearGaussianModel,
    ideal: IdealSpec,
    x0,
    M: float,
    delta: float,
    t_max: int,
    resolution=50,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    workers: int = 1,
) -> RegionGrid:
    """Label every grid node of the slice safe/unsafe.

    ``values`` holds the closed-loop spectral radius; ``extras`` carries
    ``sup_prob`` and ``max_mean_norm`` arrays. The plant is ``true_model``
    unless the slice sweeps a ``true.*`` entry. Nodes where synthesis fails
    or ``t_max`` is too short are labeled ``synth_fail``. Monte Carlo nodes
    draw from ``derive_rng(seed, node_index)``.
    """
    if not delta > 0:
        raise ValidationError("delta must be positive")
    x0 = _check_inputs(x0, M)
    res = (resolution, resolution) if np.isscalar(resolution) else tuple(resolution)
    if len(res) != 2 or min(res) < 2:
        raise ValidationError("resolution must be >= 2 per axis")
    ax1 = np.linspace(*slc.range1, int(res[0]))
    ax2 = np.linspace(*slc.range2, int(res[1]))

    def node(i, j):
        (A, B), (dA, dB) = slc.pairs_at(ax1[i], ax2[j])
        plant = true_model.replace(A=A, B=B)
        try:
            pol = cached_policy(dA, dB, ideal)
            design = plant.replace(A=dA, B=dB)
            rng = derive_rng(seed, i * ax2.size + j) if plant.n > 1 else None
            rho, p, mn = safety_sup(plant, design, pol, x0, M, t_max, samples, rng)
        except (SynthesisFailure, HorizonTooShort):
            return np.nan, SYNTH_FAIL, np.nan, np.nan
        return rho, (SAFE if p < delta else UNSAFE), p, mn

    def row(i):
        return [node(i, j) for j in range(ax2.size)]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, range(ax1.size)))
    else:
        rows = [row(i) for i in range(ax1.size)]
    values = np.array([[r[0] for r in rr] for rr in rows])
    labels = np.array([[r[1] for r in rr] for rr in rows], dtype=object)
    sup_prob = np.array([[r[2] for r in rr] for rr in rows])
    max_norm = np.array([[r[3] for r in rr] for rr in rows])
    return RegionGrid(ax1, ax2, values, labels, {"sup_prob": sup_prob, "max_mean_norm": max_norm})

