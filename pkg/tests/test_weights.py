import numpy as np
import pytest

from destmodel.constraint import DestinationConstraint
from destmodel.dynamics import SystemModel, selector_G, selector_M, stacked_psi
from destmodel.ellipsoid import loewner_leq
from destmodel.weights import (
    WeightBlocks,
    gain,
    noise_map,
    optimal_weight,
    process_noise_shape,
    random_feasible_weight,
    schur_gap,
    terminal_condition_check,
)

from conftest import small_system


def psi(sys, a, b):
    out = np.eye(sys.dim)
    for i in range(a, b):
        out = sys.transitions[i] @ out
    return out


def weight_by_sums(sys, k):
    """Optimal blocks as explicit sums over noise blocks Q_{i,j}."""
    N = sys.horizon
    W2 = sum(sys.noise_block(k - 1, j) @ psi(sys, j + 1, N).T for j in range(k - 1, N))
    W3 = sum(psi(sys, i + 1, N) @ sys.noise_block(i, j) @ psi(sys, j + 1, N).T
             for i in range(k - 1, N) for j in range(k - 1, N))
    return sys.noise_block(k - 1), W2, W3


@pytest.mark.parametrize("k", [1, 2, 4, 5])
def test_optimal_weight_matches_sums(rng, k):
    sys = small_system(rng, n=3, N=5)
    W = optimal_weight(sys, k)
    for got, want in zip((W.W1, W.W2, W.W3), weight_by_sums(sys, k)):
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-10)


def test_optimal_weight_terminal_step(rng):
    sys = small_system(rng, n=3, N=5)
    W = optimal_weight(sys, 5)
    Q = sys.noise_block(4)
    np.testing.assert_allclose(W.W2, Q)
    np.testing.assert_allclose(W.W3, Q)


def test_optimal_weight_block_diagonal(rng):
    sys = small_system(rng, n=2, N=4, dense=False)
    k = 2
    W = optimal_weight(sys, k)
    np.testing.assert_allclose(W.W2, sys.noise_block(1) @ psi(sys, 2, 4).T)
    W3 = sum(psi(sys, i + 1, 4) @ sys.noise_block(i) @ psi(sys, i + 1, 4).T for i in range(1, 4))
    np.testing.assert_allclose(W.W3, W3)


def test_optimal_full_is_congruence(rng):
    sys = small_system(rng, n=2, N=4)
    k = 2
    C = np.vstack([selector_G(sys, k), stacked_psi(sys, k)])
    M = selector_M(sys, k)
    expected = C @ M @ sys.noise_shape @ M.T @ C.T
    np.testing.assert_allclose(optimal_weight(sys, k).full(), expected, atol=1e-12)


def test_gain_zero_when_W2_zero():
    dc = DestinationConstraint([[1.0, 0.0]], [1.0])
    W = WeightBlocks(np.eye(2), np.zeros((2, 2)), np.eye(2))
    assert not gain(W, dc).any()


def test_noise_map_dense_route(rng):
    sys = small_system(rng, n=3, N=4)
    dc = DestinationConstraint(rng.standard_normal((2, 3)), [1.0, 2.0])
    W = random_feasible_weight(rng, sys)
    k = 2
    D = dc.D
    B = W.W2 @ D.T @ np.linalg.inv(D @ W.W3 @ D.T) @ D
    H = selector_G(sys, k) - B @ stacked_psi(sys, k)
    np.testing.assert_allclose(noise_map(sys, dc, W, k), H, atol=1e-12)
    M = selector_M(sys, k)
    np.testing.assert_allclose(process_noise_shape(sys, dc, W, k),
                               H @ M @ sys.noise_shape @ M.T @ H.T, atol=1e-10)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_optimal_cover_is_schur_complement(rng, m):
    sys = small_system(rng, n=3, N=5)
    dc = DestinationConstraint(rng.standard_normal((m, 3)), np.zeros(m))
    for k in range(1, 6):
        W = optimal_weight(sys, k)
        D = dc.D
        expected = W.W1 - W.W2 @ D.T @ np.linalg.inv(D @ W.W3 @ D.T) @ D @ W.W2.T
        np.testing.assert_allclose(process_noise_shape(sys, dc, W, k), expected,
                                   atol=1e-9 * np.abs(W.W1).max())
        np.testing.assert_allclose(sys.noise_block(k - 1) - process_noise_shape(sys, dc, W, k),
                                   schur_gap(W, dc), atol=1e-9 * np.abs(W.W1).max())


@pytest.mark.parametrize("q", [0.5, 1.0, 3.0])
def test_scalar_random_walk_cover(q):
    N = 6
    sys = SystemModel.time_invariant(np.eye(1), q * np.eye(1), N)
    dc = DestinationConstraint([[1.0]], [0.0])
    for k in range(1, N + 1):
        Q = process_noise_shape(sys, dc, optimal_weight(sys, k), k)
        assert Q[0, 0] == pytest.approx(q * (N - k) / (N - k + 1), abs=1e-12)


def test_terminal_cover_vanishes_for_invertible_D(cv_system):
    dc = DestinationConstraint(np.eye(4), np.zeros(4))
    Q = process_noise_shape(cv_system, dc, optimal_weight(cv_system, 50), 50)
    assert np.abs(Q).max() <= 1e-8


def test_optimal_cover_dominated_by_noise_block(cv_system, east_arrival):
    for k in (1, 25, 50):
        W = optimal_weight(cv_system, k)
        assert loewner_leq(process_noise_shape(cv_system, east_arrival, W, k),
                           cv_system.noise_block(k - 1))


def test_terminal_condition(cv_system, east_arrival):
    assert terminal_condition_check(optimal_weight(cv_system, 50), east_arrival)
    assert not terminal_condition_check(optimal_weight(cv_system, 49), east_arrival)
    W = WeightBlocks(np.eye(4), 2 * np.eye(4), np.eye(4))
    assert not terminal_condition_check(W, east_arrival)


def test_weight_blocks_validation():
    with pytest.raises(ValueError, match="W3"):
        WeightBlocks(np.eye(2), np.eye(2), np.zeros((2, 2)))
    with pytest.raises(ValueError, match="W2"):
        WeightBlocks(np.eye(2), np.eye(3), np.eye(2))


def test_strict_full_inflates_semidefinite(cv_system):
    W = optimal_weight(cv_system, 50)
    with pytest.raises(np.linalg.LinAlgError):
        np.linalg.cholesky(W.full())
    np.linalg.cholesky(W.full(strict=True))


def test_identity_weight_is_pd():
    np.linalg.cholesky(WeightBlocks.identity(4).full())


def test_random_feasible_weight(rng, cv_system):
    draws = [random_feasible_weight(rng, cv_system).full() for _ in range(100)]
    for W in draws:
        ev = np.linalg.eigvalsh(W)
        assert ev[0] > 0 and ev[-1] / ev[0] <= 1e6 * (1 + 1e-9)
        np.linalg.cholesky(W[4:, 4:])
    flat = {tuple(np.round(W.ravel(), 12)) for W in draws}
    assert len(flat) == 100
    a = random_feasible_weight(np.random.default_rng(5), cv_system).full()
    b = random_feasible_weight(np.random.default_rng(5), cv_system).full()
    np.testing.assert_array_equal(a, b)
