"""Weight matrices for the constrained projection and the noise covers they induce.

A weight ``W = [[W1, W2], [W2^T, W3]]`` (each block ``n x n``) fixes the
gain ``B = W2 D^T (D W3 D^T)^{-1} D``. At step ``k`` the reconstructed
model injects the noise ``eta_k = H_k w_{k-1}`` with ``H_k = G_k - B Psi_k``,
whose covering ellipsoid has shape ``H_k Q_w(k-1) H_k^T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraint import DestinationConstraint
from .dynamics import SystemModel, noise_cover_slice, selector_G, stacked_psi
from .ellipsoid import symmetrize

EQUALITY_TOL = 1e-9
COMPETITOR_MAX_COND = 1e6


def _is_pd(A):
    try:
        np.linalg.cholesky(symmetrize(A))
    except np.linalg.LinAlgError:
        return False
    return True


@dataclass(frozen=True, eq=False)
class WeightBlocks:
    W1: np.ndarray
    W2: np.ndarray
    W3: np.ndarray

    def __post_init__(self):
        W1, W2, W3 = (np.array(b, dtype=float) for b in (self.W1, self.W2, self.W3))
        n = W3.shape[0]
        for name, b in (("W1", W1), ("W2", W2), ("W3", W3)):
            if b.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}, got {b.shape}")
        if not _is_pd(W3):
            raise ValueError("W3 must be positive definite")
        W1, W3 = symmetrize(W1), symmetrize(W3)
        for name, b in (("W1", W1), ("W2", W2), ("W3", W3)):
            b.setflags(write=False)
            object.__setattr__(self, name, b)

    @classmethod
    def from_full(cls, W):
        W = np.asarray(W, dtype=float)
        n = W.shape[0] // 2
        return cls(W[:n, :n], W[:n, n:], W[n:, n:])

    @classmethod
    def identity(cls, n):
        """``W2 = W3 = I`` with ``W1 = 2I`` so the full matrix is positive definite."""
        eye = np.eye(n)
        return cls(2.0 * eye, eye, eye)

    @property
    def n(self):
        return self.W3.shape[0]

    def full(self, strict=False):
        """Assemble the ``2n x 2n`` matrix.

        With ``strict=True`` the result is guaranteed positive definite:
        if it is only semidefinite, ``W1`` is inflated by
        ``1e-9 * trace(W1) / n``. The gain does not depend on ``W1``.
        """
        W = np.block([[self.W1, self.W2], [self.W2.T, self.W3]])
        if not strict or _is_pd(W):
            return W
        eps = 1e-9 * np.trace(self.W1) / self.n
        W[: self.n, : self.n] += eps * np.eye(self.n)
        if not _is_pd(W):
            raise ValueError("weight matrix is not positive definite after W1 inflation")
        return W


def optimal_weight(sys: SystemModel, k) -> WeightBlocks:
    """Noise-cover minimizing weight for step ``k``.

    ``W1 = Q_{k-1}``, ``W2 = G_k Q_w Psi_k^T``, ``W3 = Psi_k Q_w Psi_k^T``,
    where ``Q_w`` is the trailing noise shape for ``(w_{k-1}, ..., w_{N-1})``.
    Together they are ``C_k Q_w C_k^T`` with ``C_k = [G_k; Psi_k]``.
    """
    Qw = noise_cover_slice(sys, k)
    Psi = stacked_psi(sys, k)
    n = sys.dim
    QwPsiT = Qw @ Psi.T
    return WeightBlocks(
        sys.noise_block(k - 1),
        QwPsiT[:n],
        symmetrize(Psi @ QwPsiT),
    )


def gain(W: WeightBlocks, dc: DestinationConstraint):
    """``B = W2 D^T (D W3 D^T)^{-1} D``."""
    D = dc.D
    S = D @ W.W3 @ D.T
    if np.linalg.cond(S) > 1e14:
        raise np.linalg.LinAlgError("D W3 D^T is numerically singular")
    return np.linalg.solve(S, D @ W.W2.T).T @ D


def noise_map(sys: SystemModel, dc: DestinationConstraint, W: WeightBlocks, k):
    """``H_k = G_k - B Psi_k``; maps ``(w_{k-1}, ..., w_{N-1})`` to ``eta_k``."""
    return selector_G(sys, k) - gain(W, dc) @ stacked_psi(sys, k)


def process_noise_shape(sys: SystemModel, dc: DestinationConstraint, W: WeightBlocks, k):
    """Shape of the ellipsoid covering ``eta_k``: ``H_k Q_w(k-1) H_k^T``.

    Symmetric PSD; singular in general (zero at ``k = N`` for invertible ``D``).
    """
    H = noise_map(sys, dc, W, k)
    return symmetrize(H @ noise_cover_slice(sys, k) @ H.T)


def schur_gap(W: WeightBlocks, dc: DestinationConstraint):
    """``W2 D^T (D W3 D^T)^{-1} D W2^T``, the shrinkage of the optimal cover."""
    return symmetrize(gain(W, dc) @ W.W2.T)


def terminal_condition_check(W_N: WeightBlocks, dc: DestinationConstraint, tol=EQUALITY_TOL):
    """True when ``D (W2 - W3) D^T`` vanishes relative to the scale of ``D W3 D^T``."""
    D = dc.D
    gap = D @ (W_N.W2 - W_N.W3) @ D.T
    scale = 1.0 + np.max(np.abs(D @ W_N.W3 @ D.T))
    return bool(np.max(np.abs(gap)) <= tol * scale)


def random_feasible_weight(rng: np.random.Generator, sys: SystemModel, k=None,
                           max_cond=COMPETITOR_MAX_COND) -> WeightBlocks:
    """Random SPD ``2n x 2n`` weight ``G^T G + eps I``, condition number capped.

    ``k`` is accepted for interface symmetry with :func:`optimal_weight`;
    the draw depends only on the state dimension.
    """
    m = 2 * sys.dim
    G = rng.standard_normal((m, m))
    W = G.T @ G + 1e-3 * np.eye(m)
    ev, V = np.linalg.eigh(W)
    ev = np.maximum(ev, ev[-1] / max_cond)
    W = symmetrize((V * ev) @ V.T)
    return WeightBlocks.from_full(W)
