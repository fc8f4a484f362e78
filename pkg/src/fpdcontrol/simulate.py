"""Monte Carlo closed-loop simulation with worker-count independent seeding.

Trajectory ``i`` of an ensemble seeded with ``s`` always draws from
``derive_rng(s, i)``, and chunk results are merged in index order, so the
statistics do not depend on how many workers ran the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .finite import PolicyStep, Trajectory, closed_loop_moment_arrays
from .gaussian import LinearGaussianModel, ValidationError, as_vector
from .stationary import StationaryPolicy

CHUNK = 4096
DEFAULT_BINS = 61
Policy = Union[StationaryPolicy, Sequence[PolicyStep]]


def derive_rng(base_seed: int, index: int) -> np.random.Generator:
    """Generator for stream ``index`` of ``base_seed`` (hash-based split, no shared state)."""
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(seq))


def policy_schedule(policy: Policy, horizon: int) -> list[PolicyStep]:
    if isinstance(policy, StationaryPolicy):
        return [policy.as_step()] * horizon
    steps = list(policy)
    if len(steps) < horizon:
        raise ValidationError(f"policy covers {len(steps)} steps, {horizon} requested")
    return steps[:horizon]


def draw_noise(rng: np.random.Generator, horizon: int, n: int, m: int) -> np.ndarray:
    """Standard normals for one trajectory: columns ``[:m]`` input, ``[m:]`` process."""
    return rng.standard_normal((horizon, m + n))


def step_states(X, A, B, step: PolicyStep, u_chol, x_chol, z):
    """Advance a batch of states ``X`` (rows) one step; returns ``(X_next, U)``."""
    m = B.shape[1]
    U = X @ step.feedback_gain.T + step.affine_offset + z[:, :m] @ u_chol.T
    X_next = X @ A.T + U @ B.T + z[:, m:] @ x_chol.T
    return X_next, U


class _Schedule:
    def __init__(self, model: LinearGaussianModel, steps: list[PolicyStep]):
        self.model = model
        self.steps = steps
        chol_cache: dict[int, np.ndarray] = {}
        self.u_chols = []
        for s in steps:
            key = id(s.input_cov)
            if key not in chol_cache:
                # an all-zero covariance encodes a skipped step (u = 0)
                chol_cache[key] = (np.linalg.cholesky(s.input_cov) if np.any(s.input_cov)
                                   else np.zeros_like(s.input_cov))
            self.u_chols.append(chol_cache[key])
        self.x_chol = np.linalg.cholesky(model.noise_cov)

    def run(self, x0: np.ndarray, Z: np.ndarray):
        """Propagate ``len(Z)`` trajectories from ``x0``; ``Z`` has shape ``(c, T, m+n)``."""
        model = self.model
        c, T = Z.shape[0], Z.shape[1]
        X = np.repeat(x0[None, :], c, axis=0)
        states = np.empty((T + 1, c, model.n))
        inputs = np.empty((T, c, model.m))
        states[0] = X
        for k in range(T):
            X, U = step_states(X, model.A, model.B, self.steps[k], self.u_chols[k], self.x_chol, Z[:, k, :])
            states[k + 1] = X
            inputs[k] = U
        return states, inputs


def simulate_trajectory(
    true_model: LinearGaussianModel,
    policy: Policy,
    x0,
    rng: np.random.Generator,
    horizon: int | None = None,
) -> Trajectory:
    """One closed-loop realization; fully determined by the generator state."""
    if horizon is None:
        if isinstance(policy, StationaryPolicy):
            raise ValidationError("a stationary policy needs an explicit horizon")
        horizon = len(policy)
    x0 = as_vector(x0, "x0")
    if x0.size != true_model.n:
        raise ValidationError("x0 does not match the model dimension")
    sched = _Schedule(true_model, policy_schedule(policy, horizon))
    Z = draw_noise(rng, horizon, true_model.n, true_model.m)[None]
    states, inputs = sched.run(x0, Z)
    return Trajectory(states[:, 0, :], inputs[:, 0, :])


@dataclass
class _Moments:
    """Running count/mean/M2 over axis 1 of a ``(T, c, d)`` block (Chan merge)."""

    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, block: np.ndarray) -> "_Moments":
        mean = block.mean(axis=1)
        dev = block - mean[:, None, :]
        return cls(block.shape[1], mean, np.einsum("tci,tcj->tij", dev, dev))

    def merge(self, other: "_Moments") -> "_Moments":
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + np.einsum("ti,tj->tij", delta, delta) * (self.count * other.count / n)
        return _Moments(n, mean, m2)


@dataclass(frozen=True)
class EnsembleStats:
    """Per-step ensemble statistics; row ``t`` of state arrays is ``x_t`` (``t = 0..T``).

    ``se`` is ``None`` for a single-run ensemble. Input arrays have rows for
    ``u_1..u_T``. ``exceed_prob[t]`` is the fraction of runs with
    ``||x_t|| > threshold`` when a threshold was requested.
    """

    runs: int
    mean: np.ndarray
    cov: np.ndarray
    se: np.ndarray | None
    input_mean: np.ndarray
    input_cov: np.ndarray
    input_se: np.ndarray | None
    mean_abs_input: np.ndarray
    mean_norm: np.ndarray
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    exceed_prob: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.mean.shape[0] - 1


def default_hist_edges(model, steps, x0, horizon, bins=DEFAULT_BINS, width_sigmas=5.0) -> np.ndarray:
    """Edges per coordinate over predicted final mean +/- ``width_sigmas`` sd."""
    means, covs = closed_loop_moment_arrays(model, steps, x0, np.zeros((model.n, model.n)), horizon)
    mu = means[-1]
    sd = np.sqrt(np.diag(covs[-1]))
    return np.stack([np.linspace(mu[i] - width_sigmas * sd[i], mu[i] + width_sigmas * sd[i], bins + 1)
                     for i in range(model.n)])


def run_ensemble_raw(
    true_model: LinearGaussianModel,
    policy: Policy,
    x0,
    horizon: int,
    runs: int,
    seed: int,
    workers: int = 1,
    hist_edges: np.ndarray | None = None,
    exceed_threshold: float | None = None,
) -> EnsembleStats:
    """Simulate ``runs`` trajectories and aggregate them in index order."""
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    x0 = as_vector(x0, "x0")
    if x0.size != true_model.n:
        raise ValidationError("x0 does not match the model dimension")
    steps = policy_schedule(policy, horizon)
    sched = _Schedule(true_model, steps)
    n, m = true_model.n, true_model.m
    if hist_edges is None:
        hist_edges = default_hist_edges(true_model, steps, x0, horizon)
    hist_edges = np.atleast_2d(hist_edges)

    bounds = [(lo, min(lo + CHUNK, runs)) for lo in range(0, runs, CHUNK)]

    def do_chunk(bound):
        lo, hi = bound
        Z = np.stack([draw_noise(derive_rng(seed, i), horizon, n, m) for i in range(lo, hi)])
        states, inputs = sched.run(x0, Z)
        norms = np.linalg.norm(states, axis=2)
        out = {
            "x": _Moments.of(states),
            "u": _Moments.of(inputs),
            "abs_u": np.abs(inputs).sum(axis=1),
            "norm": norms.sum(axis=1),
            "hist": np.stack([np.histogram(np.clip(states[-1, :, i], hist_edges[i][0], hist_edges[i][-1]), bins=hist_edges[i])[0] for i in range(n)]),
        }
        if exceed_threshold is not None:
            out["exceed"] = (norms > exceed_threshold).sum(axis=1)
        return out

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(do_chunk, bounds))
    else:
        parts = [do_chunk(b) for b in bounds]

    xm, um = parts[0]["x"], parts[0]["u"]
    abs_u, norm, hist = parts[0]["abs_u"], parts[0]["norm"], parts[0]["hist"]
    exceed = parts[0].get("exceed")
    for p in parts[1:]:
        xm, um = xm.merge(p["x"]), um.merge(p["u"])
        abs_u = abs_u + p["abs_u"]
        norm = norm + p["norm"]
        hist = hist + p["hist"]
        if exceed is not None:
            exceed = exceed + p["exceed"]

    if runs > 1:
        cov = xm.m2 / (runs - 1)
        ucov = um.m2 / (runs - 1)
        se = np.sqrt(np.einsum("tii->ti", cov) / runs)
        use = np.sqrt(np.einsum("tii->ti", ucov) / runs)
    else:
        cov, ucov = np.zeros_like(xm.m2), np.zeros_like(um.m2)
        se = use = None
    return EnsembleStats(
        runs=runs,
        mean=xm.mean,
        cov=cov,
        se=se,
        input_mean=um.mean,
        input_cov=ucov,
        input_se=use,
        mean_abs_input=abs_u / runs,
        mean_norm=norm / runs,
        hist_edges=hist_edges,
        hist_counts=hist,
        exceed_prob=None if exceed is None else exceed / runs,
    )
