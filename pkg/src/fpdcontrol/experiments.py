"""Config-driven experiment drivers behind the CLI subcommands."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .continuation import BoundaryCurve, trace_boundary
from .finite import PolicyStep, synthesize_finite
from .gaussian import ValidationError
from .learning import LearningPlan, learning_ensemble
from .regions import ParamSlice2D, RegionGrid, grid_scan, slice_indicator
from .safety import safety_region
from .simulate import EnsembleStats, default_hist_edges, policy_schedule, run_ensemble_raw
from .stationary import DesignModel, StationaryPolicy, stationary_policy


def ensemble_policy(cfg: ExperimentConfig):
    if cfg.policy == "stationary":
        return stationary_policy(cfg.model, cfg.ideal)
    return synthesize_finite(cfg.model, cfg.ideal, cfg.horizon)[1]


def finite_policy(cfg: ExperimentConfig) -> list[PolicyStep]:
    return synthesize_finite(cfg.model, cfg.ideal, cfg.horizon)[1]


def _hist_edges(cfg: ExperimentConfig, policy) -> np.ndarray:
    if cfg.hist_range is not None:
        edges = np.linspace(*cfg.hist_range, cfg.bins + 1)
        return np.repeat(edges[None, :], cfg.model.n, axis=0)
    steps = policy_schedule(policy, cfg.horizon)
    return default_hist_edges(cfg.model, steps, cfg.x0, cfg.horizon, bins=cfg.bins)


def run_ensemble(cfg: ExperimentConfig, workers: int = 1, policy=None) -> EnsembleStats:
    """Monte Carlo ensemble of the true model under the configured policy."""
    policy = ensemble_policy(cfg) if policy is None else policy
    return run_ensemble_raw(cfg.model, policy, cfg.x0, cfg.horizon, cfg.runs, cfg.seed,
                            workers=workers, hist_edges=_hist_edges(cfg, policy))


@dataclass(frozen=True)
class MismatchResult:
    exact: EnsembleStats
    design: EnsembleStats
    exact_policy: StationaryPolicy
    design_policy: StationaryPolicy

    @property
    def gain_ratio(self) -> float:
        """Design/exact input magnitude at matched states (ratio of gain norms)."""
        return float(np.linalg.norm(self.design_policy.gain, 2) / np.linalg.norm(self.exact_policy.gain, 2))

    @property
    def mean_abs_input_ratio(self) -> float:
        """Design/exact ratio of ``|u_t|`` averaged over runs and steps."""
        return float(self.design.mean_abs_input.mean() / self.exact.mean_abs_input.mean())


def run_mismatch_experiment(cfg: ExperimentConfig, workers: int = 1) -> MismatchResult:
    """Same plant and noise seeds, controlled by exact-model vs design-model stationary policies."""
    if cfg.design is None:
        raise ValidationError("mismatch experiment needs a [design] section")
    exact_pol = stationary_policy(cfg.model, cfg.ideal)
    design_pol = stationary_policy(cfg.design, cfg.ideal)
    edges = _hist_edges(cfg, exact_pol)
    exact = run_ensemble_raw(cfg.model, exact_pol, cfg.x0, cfg.horizon, cfg.runs, cfg.seed,
                             workers=workers, hist_edges=edges)
    design = run_ensemble_raw(cfg.model, design_pol, cfg.x0, cfg.horizon, cfg.runs, cfg.seed,
                              workers=workers, hist_edges=edges)
    return MismatchResult(exact, design, exact_pol, design_pol)


def region_slice(cfg: ExperimentConfig) -> ParamSlice2D:
    if cfg.region is None:
        raise ValidationError("this experiment needs a [region] section")
    r = cfg.region
    design = cfg.design if cfg.design is not None else DesignModel(cfg.model.A, cfg.model.B, cfg.model.noise_cov)
    return ParamSlice2D(r.axis1, r.axis2, r.range1, r.range2, cfg.model, design)


def run_region_convergence(cfg: ExperimentConfig, workers: int = 1) -> tuple[RegionGrid, list[BoundaryCurve]]:
    slc = region_slice(cfg)
    r = cfg.region
    indicator = slice_indicator(slc, cfg.ideal, r.knowledge)
    grid = grid_scan(slc, indicator, r.resolution, workers=workers)
    curves = []
    if r.trace:
        for hint in r.trace_start:
            curves.append(trace_boundary(slc, indicator, hint, step=r.trace_step, tol=r.trace_tol,
                                         search_direction=r.trace_direction))
    return grid, curves


def run_region_safety(cfg: ExperimentConfig, workers: int = 1) -> RegionGrid:
    if cfg.safety is None:
        raise ValidationError("region-safety needs a [safety] section")
    slc = region_slice(cfg)
    s = cfg.safety
    res = s.resolution or cfg.region.resolution
    return safety_region(slc, cfg.model, cfg.ideal, s.x0, s.M, s.delta, s.t_max,
                         resolution=res, samples=s.samples, seed=cfg.seed, workers=workers)


def run_learning(cfg: ExperimentConfig, workers: int = 1) -> tuple[LearningPlan, EnsembleStats]:
    if cfg.learning is None:
        raise ValidationError("learn needs a [learning] section")
    ls = cfg.learning
    return learning_ensemble(cfg.model, cfg.ideal, ls.schedule, cfg.horizon, ls.x0, ls.runs,
                             cfg.seed, workers=workers)
