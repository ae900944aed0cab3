import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from destmodel.dynamics import (
    SystemModel,
    noise_cover_slice,
    noise_slice,
    propagate,
    residual_zeta,
    selector_G,
    selector_M,
    stacked_psi,
    transition_product,
)
from destmodel.scenario import cv_transition

from conftest import small_system


def test_psi_same_time_is_identity(cv_system):
    for t in (0, 7, 50):
        np.testing.assert_array_equal(transition_product(cv_system, t, t), np.eye(4))


def test_psi_cv_two_steps(cv_system):
    P = transition_product(cv_system, 3, 5)
    np.testing.assert_allclose(P, cv_transition(2.0))
    assert P[0, 1] == 2.0 and P[2, 3] == 2.0


def test_psi_time_varying_order(rng):
    sys = small_system(rng, n=3, N=5)
    F = sys.transitions
    np.testing.assert_allclose(transition_product(sys, 1, 4), F[3] @ F[2] @ F[1])
    np.testing.assert_allclose(transition_product(sys, 0, 5), F[4] @ F[3] @ F[2] @ F[1] @ F[0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6))
def test_psi_composition(a, b, c):
    j, k, t = sorted((a, b, c))
    sys = small_system(np.random.default_rng(3), n=2, N=6)
    lhs = transition_product(sys, k, t) @ transition_product(sys, j, k)
    np.testing.assert_allclose(lhs, transition_product(sys, j, t), atol=1e-12)


def test_psi_bad_indices(cv_system):
    with pytest.raises(ValueError):
        transition_product(cv_system, 5, 4)
    with pytest.raises(ValueError):
        transition_product(cv_system, 0, 51)


def test_stacked_psi_terminal(cv_system):
    np.testing.assert_array_equal(stacked_psi(cv_system, 50), np.eye(4))
    np.testing.assert_allclose(stacked_psi(cv_system, 49),
                               np.hstack([cv_transition(1.0), np.eye(4)]))


def test_stacked_psi_first_step(cv_system):
    Psi = stacked_psi(cv_system, 1)
    assert Psi.shape == (4, 200)
    F = cv_transition(1.0)
    for i in range(50):
        np.testing.assert_allclose(Psi[:, 4 * i:4 * i + 4], np.linalg.matrix_power(F, 49 - i))


def test_selector_G(cv_system):
    G = selector_G(cv_system, 48)
    assert G.shape == (4, 12)
    np.testing.assert_array_equal(G[:, :4], np.eye(4))
    assert not G[:, 4:].any()


def test_selector_M_extremes(rng):
    sys = small_system(rng, n=3, N=4)
    np.testing.assert_array_equal(selector_M(sys, 1), np.eye(12))
    w0 = rng.standard_normal(12)
    np.testing.assert_array_equal(selector_M(sys, 4) @ w0, w0[-3:])


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_selector_M_matches_slice(rng, k):
    sys = small_system(rng, n=3, N=4)
    w0 = rng.standard_normal(12)
    np.testing.assert_array_equal(selector_M(sys, k) @ w0, w0[noise_slice(sys, k)])
    assert selector_M(sys, k).shape == (3 * (5 - k), 12)


@pytest.mark.parametrize("k", [1, 2, 4])
def test_noise_cover_slice_matches_dense_selector(rng, k):
    sys = small_system(rng, n=3, N=4)
    M = selector_M(sys, k)
    np.testing.assert_allclose(noise_cover_slice(sys, k), M @ sys.noise_shape @ M.T)


def test_noise_cover_block_diagonal(cv_system):
    Q = noise_cover_slice(cv_system, 49)
    q = cv_system.noise_block(0)
    np.testing.assert_allclose(Q, np.block([[q, np.zeros((4, 4))], [np.zeros((4, 4)), q]]))


def test_zeta_empty_is_zero(cv_system):
    np.testing.assert_array_equal(residual_zeta(cv_system, 7, 7, []), np.zeros(4))


def test_zeta_single_step(cv_system):
    w = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(residual_zeta(cv_system, 7, 8, [w]), w)


def test_zeta_matches_forward_iteration(rng):
    sys = small_system(rng, n=3, N=6)
    ws = rng.standard_normal((4, 3))
    x0 = rng.standard_normal(3)
    # Forward iteration from x_1 to x_5.
    x = x0.copy()
    for j, w in enumerate(ws, start=1):
        x = sys.transitions[j] @ x + w
    z = residual_zeta(sys, 1, 5, ws)
    np.testing.assert_allclose(transition_product(sys, 1, 5) @ x0 + z, x)
    # and against the explicit sum
    explicit = sum(transition_product(sys, j + 1, 5) @ ws[j - 1] for j in range(1, 5))
    np.testing.assert_allclose(z, explicit)


def test_zeta_wrong_count(cv_system):
    with pytest.raises(ValueError):
        residual_zeta(cv_system, 1, 4, [np.zeros(4)])


def test_propagate_constant_velocity(cv_system):
    states = propagate(cv_system, [0.0, 240.0, 10000.0, 0.0], np.zeros((50, 4)))
    assert states.shape == (51, 4)
    np.testing.assert_allclose(states[:, 0], 240.0 * np.arange(51))
    np.testing.assert_allclose(states[:, 2], 10000.0)


@pytest.mark.parametrize("F, Q, msg", [
    (np.zeros((2, 2, 2)), np.eye(4), "singular"),
    (np.broadcast_to(np.eye(2), (2, 2, 2)), np.diag([1.0, 1.0, 1.0, 0.0]), "positive definite"),
    (np.broadcast_to(np.eye(2), (2, 2, 2)), np.eye(3), "noise_shape"),
])
def test_system_validation(F, Q, msg):
    with pytest.raises(ValueError, match=msg):
        SystemModel(F, Q)


def test_block_diagonal_uses_given_blocks(rng):
    blocks = [np.eye(2) * (i + 1) for i in range(3)]
    sys = SystemModel.block_diagonal(np.broadcast_to(np.eye(2), (3, 2, 2)), blocks)
    for i in range(3):
        np.testing.assert_array_equal(sys.noise_block(i), blocks[i])
    assert not sys.noise_block(0, 2).any()
