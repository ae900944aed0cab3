"""Linear time-varying system ``x_{k+1} = F_k x_k + w_k`` over a finite horizon.

The stacked noise ``w_0 = (w_0, ..., w_{N-1})`` lives in the ellipsoid
``{w : w^T Q_w0^{-1} w <= 1}``. Block ``(i, j)`` of ``Q_w0`` couples
``w_i`` and ``w_j``.

Indexing follows the recursion ``x_t = Psi(k, t) x_k + zeta(k, t)`` with
``Psi(k, t) = F_{t-1} ... F_k`` and ``Psi(t, t) = I``. Stacked operators
for step ``k`` (``1 <= k <= N``) act on the trailing noise vector
``(w_{k-1}, ..., w_{N-1})``, which has ``N - k + 1`` blocks.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .ellipsoid import Ellipsoid, _check_symmetric, is_psd, symmetrize


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Transitions ``F_0 .. F_{N-1}`` (array ``(N, n, n)``) and stacked noise shape."""

    transitions: np.ndarray
    noise_shape: np.ndarray

    def __post_init__(self):
        F = np.array(self.transitions, dtype=float)
        if F.ndim != 3 or F.shape[1] != F.shape[2] or F.shape[0] < 1:
            raise ValueError(f"transitions must have shape (N, n, n), got {F.shape}")
        N, n, _ = F.shape
        Q = np.array(self.noise_shape, dtype=float)
        if Q.shape != (n * N, n * N):
            raise ValueError(f"noise_shape must be {n * N}x{n * N}, got {Q.shape}")
        _check_symmetric(Q, "noise_shape")
        Q = symmetrize(Q)
        for k, Fk in enumerate(F):
            scale = max(1.0, np.max(np.abs(Fk))) ** n
            if abs(np.linalg.det(Fk)) <= 1e-12 * scale:
                raise ValueError(f"transition F_{k} is singular")
        if not is_psd(Q) or np.linalg.eigvalsh(Q)[0] <= 0.0:
            raise ValueError("noise_shape must be positive definite")
        F.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "transitions", F)
        object.__setattr__(self, "noise_shape", Q)

    @classmethod
    def block_diagonal(cls, transitions, noise_blocks):
        """Build with ``Q_w0 = diag(Q_0, ..., Q_{N-1})``.

        ``noise_blocks`` is either one ``n x n`` matrix reused at every
        step or a sequence of ``N`` blocks.
        """
        F = np.asarray(transitions, dtype=float)
        blocks = np.asarray(noise_blocks, dtype=float)
        if blocks.ndim == 2:
            blocks = np.broadcast_to(blocks, (F.shape[0],) + blocks.shape)
        if blocks.shape[0] != F.shape[0]:
            raise ValueError(f"need {F.shape[0]} noise blocks, got {blocks.shape[0]}")
        return cls(F, scipy.linalg.block_diag(*blocks))

    @classmethod
    def time_invariant(cls, F, Q, horizon):
        F = np.asarray(F, dtype=float)
        return cls.block_diagonal(np.broadcast_to(F, (horizon,) + F.shape), Q)

    @property
    def horizon(self):
        return self.transitions.shape[0]

    @property
    def dim(self):
        return self.transitions.shape[1]

    def noise_block(self, i, j=None):
        """Block ``Q_{i,j}`` of the stacked noise shape (``Q_i`` when ``j`` is omitted)."""
        j = i if j is None else j
        n = self.dim
        return self.noise_shape[i * n:(i + 1) * n, j * n:(j + 1) * n]

    def noise_ellipsoid(self):
        return Ellipsoid(np.zeros(self.dim * self.horizon), self.noise_shape)

    @cached_property
    def _to_terminal(self):
        # Psi(i, N) for i = 0..N, built backwards: Psi(i, N) = Psi(i+1, N) F_i.
        N, n = self.horizon, self.dim
        out = np.empty((N + 1, n, n))
        out[N] = np.eye(n)
        for i in range(N - 1, -1, -1):
            out[i] = out[i + 1] @ self.transitions[i]
        out.setflags(write=False)
        return out


def _check_step(sys, k):
    if not 1 <= k <= sys.horizon:
        raise ValueError(f"step k={k} outside 1..{sys.horizon}")


def transition_product(sys: SystemModel, k, t):
    """``Psi(k, t) = F_{t-1} F_{t-2} ... F_k``, identity when ``k == t``."""
    if not 0 <= k <= t <= sys.horizon:
        raise ValueError(f"need 0 <= k <= t <= N, got k={k}, t={t}, N={sys.horizon}")
    if t == sys.horizon:
        return sys._to_terminal[k].copy()
    out = np.eye(sys.dim)
    for i in range(k, t):
        out = sys.transitions[i] @ out
    return out


def stacked_psi(sys: SystemModel, k):
    """``[Psi(k, N), Psi(k+1, N), ..., Psi(N, N)]``, shape ``n x n(N-k+1)``."""
    _check_step(sys, k)
    return np.hstack(list(sys._to_terminal[k:]))


def selector_G(sys: SystemModel, k):
    """``[I, 0, ..., 0]`` with ``N - k`` zero blocks."""
    _check_step(sys, k)
    n = sys.dim
    G = np.zeros((n, n * (sys.horizon - k + 1)))
    G[:, :n] = np.eye(n)
    return G


def noise_slice(sys: SystemModel, k) -> slice:
    """Index range of ``(w_{k-1}, ..., w_{N-1})`` inside the stacked noise vector."""
    _check_step(sys, k)
    return slice((k - 1) * sys.dim, sys.horizon * sys.dim)


def selector_M(sys: SystemModel, k):
    """Dense block selector with ``M_k w_0 = (w_{k-1}, ..., w_{N-1})``.

    Internal code uses :func:`noise_slice`; the dense form exists for
    inspection and cross-checks.
    """
    sl = noise_slice(sys, k)
    total = sys.dim * sys.horizon
    return np.eye(total)[sl]


def noise_cover_slice(sys: SystemModel, k):
    """``Q_w(k-1) = M_k Q_w0 M_k^T``, the trailing principal block of ``Q_w0``."""
    sl = noise_slice(sys, k)
    return sys.noise_shape[sl, sl].copy()


def residual_zeta(sys: SystemModel, k, t, noises):
    """``zeta(k, t) = sum_{j=k}^{t-1} Psi(j+1, t) w_j``.

    ``noises`` holds ``w_k, ..., w_{t-1}`` (``t - k`` vectors).
    """
    if not 0 <= k <= t <= sys.horizon:
        raise ValueError(f"need 0 <= k <= t <= N, got k={k}, t={t}")
    noises = [np.asarray(w, dtype=float).reshape(-1) for w in noises]
    if len(noises) != t - k:
        raise ValueError(f"expected {t - k} noise vectors, got {len(noises)}")
    # Horner form of the sum: z <- F_j z + w_j.
    z = np.zeros(sys.dim)
    for j, w in enumerate(noises, start=k):
        z = sys.transitions[j] @ z + w
    return z


def propagate(sys: SystemModel, x0, noises, start=0):
    """Iterate the unconstrained recursion from ``x_start`` through each noise."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    states = [x]
    for offset, w in enumerate(noises):
        x = sys.transitions[start + offset] @ x + np.asarray(w, dtype=float)
        states.append(x)
    return np.array(states)
