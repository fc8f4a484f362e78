import numpy as np
import pytest

from fpdcontrol import IdealSpec, LinearGaussianModel
from fpdcontrol.stationary import DesignModel

# scalar example plant and targets
A_EX, B_EX, NOISE_EX = 1.27, 0.04, 0.6
IDEAL_X, IDEAL_U = 0.2, 0.4
B_TILDE = 0.02


@pytest.fixture
def plant():
    return LinearGaussianModel(A_EX, B_EX, NOISE_EX)


@pytest.fixture
def ideal():
    return IdealSpec.zero_mean(IDEAL_X, IDEAL_U)


@pytest.fixture
def mismatch_design():
    return DesignModel(A_EX, B_TILDE, NOISE_EX)


def random_spd(rng, n, floor=0.1):
    X = rng.standard_normal((n, n))
    return X @ X.T + floor * np.eye(n)


def random_system(rng, n, m):
    """Random (A, B) scaled so that A has spectral radius in [0.5, 1.5]."""
    A = rng.standard_normal((n, n))
    A *= rng.uniform(0.5, 1.5) / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-9)
    B = rng.standard_normal((n, m))
    return A, B
