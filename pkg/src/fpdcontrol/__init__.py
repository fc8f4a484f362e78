"""KL-optimal (fully probabilistic) control for linear-Gaussian systems."""

from .continuation import BoundaryCurve, trace_boundary
from .finite import (
    BackwardPass,
    PolicyStep,
    Trajectory,
    closed_loop_moments,
    lqr_cost,
    stability_matrix,
    synthesize_finite,
)
from .gaussian import (
    GaussianDensity,
    IdealSpec,
    LinearGaussianModel,
    NumericalError,
    ValidationError,
    kl_gaussian,
    sample_gaussian,
    spectral_radius,
)
from .learning import LearningSchedule, learning_run
from .regions import (
    KnowledgeSet,
    ParamSlice2D,
    convergence_indicator,
    grid_scan,
    robust_indicator,
)
from .safety import safety_probability, safety_region
from .simulate import EnsembleStats, derive_rng, simulate_trajectory
from .stationary import (
    DesignModel,
    StationaryPolicy,
    mismatch_closed_loop,
    solve_riccati,
    stationary_policy,
    stationary_state_cov,
)

__version__ = "0.1.0"
