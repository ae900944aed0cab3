import numpy as np
import pytest

from destmodel.constraint import heading_constraint
from destmodel.dynamics import SystemModel
from destmodel.scenario import cv_noise_block, cv_transition

X0 = np.array([0.0, 240.0, 10000.0, 0.0])
DEST = (12000.0, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def cv_system():
    """The 50-step constant-velocity scenario (T = 1 s, g = 9.8 m/s^2)."""
    return SystemModel.time_invariant(cv_transition(1.0), cv_noise_block(1.0, 9.8), 50)


@pytest.fixture(scope="session")
def east_arrival():
    """Arrive at (12 km, 0) with theta = 90 deg."""
    return heading_constraint(*DEST, np.pi / 2)


def small_system(rng, n=3, N=4, dense=True):
    F = np.eye(n) + 0.4 * rng.standard_normal((N, n, n)) / np.sqrt(n)
    if dense:
        A = rng.standard_normal((n * N, n * N))
        Q = A @ A.T / (n * N) + 0.2 * np.eye(n * N)
        return SystemModel(F, 0.5 * (Q + Q.T))
    blocks = []
    for _ in range(N):
        A = rng.standard_normal((n, n))
        blocks.append(A @ A.T + 0.5 * np.eye(n))
    return SystemModel.block_diagonal(F, blocks)
