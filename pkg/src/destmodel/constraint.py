"""Terminal equality constraint ``D x_N = d`` and the weighted projection onto it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-10


def _full_row_rank(A):
    if A.shape[0] > A.shape[1]:
        return False
    s = np.linalg.svd(A, compute_uv=False)
    return bool(s.size and s[-1] > RANK_TOL * max(1.0, s[0]))


@dataclass(frozen=True, eq=False)
class DestinationConstraint:
    """``D`` is ``m x n`` with full row rank, ``d`` has length ``m``."""

    D: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.array(self.D, dtype=float))
        d = np.array(self.d, dtype=float).reshape(-1)
        if d.size != D.shape[0]:
            raise ValueError(f"d has length {d.size}, D has {D.shape[0]} rows")
        if not _full_row_rank(D):
            raise ValueError("D must have full row rank")
        D.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "d", d)

    @property
    def m(self):
        return self.D.shape[0]

    @property
    def n(self):
        return self.D.shape[1]

    @property
    def invertible(self):
        return self.m == self.n

    def residual(self, x):
        return self.D @ np.asarray(x, dtype=float) - self.d

    def block(self) -> BlockConstraint:
        return BlockConstraint.from_destination(self)


@dataclass(frozen=True, eq=False)
class BlockConstraint:
    """``[0 D]`` acting on the combined state ``(x_k, x_N)`` of length ``2n``."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.array(self.matrix, dtype=float))
        if M.shape[1] % 2:
            raise ValueError("block constraint needs an even column count")
        n = M.shape[1] // 2
        if np.any(M[:, :n] != 0.0):
            raise ValueError("left block of the block constraint must be zero")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @classmethod
    def from_destination(cls, dc: DestinationConstraint):
        return cls(np.hstack([np.zeros_like(dc.D), dc.D]))


def pseudoinverse(A):
    """Right inverse ``A^T (A A^T)^{-1}`` of a full-row-rank matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not _full_row_rank(A):
        raise ValueError("pseudoinverse needs a full-row-rank matrix")
    return np.linalg.solve(A @ A.T, A).T


def _weighted_gain(W, C):
    # W C^T (C W C^T)^{-1}
    S = C @ W @ C.T
    if np.linalg.cond(S) > 1e14:
        raise np.linalg.LinAlgError(
            f"C W C^T is numerically singular (cond {np.linalg.cond(S):.2e})"
        )
    return np.linalg.solve(S, C @ W.T).T


def projector_A(W, bc: BlockConstraint):
    """Oblique projector ``I - W C^T (C W C^T)^{-1} C`` onto the null space of ``C``.

    ``C`` is the block constraint matrix; ``W`` is the ``2n x 2n`` SPD metric.
    """
    W = np.asarray(W, dtype=float)
    C = bc.matrix
    if W.shape != (C.shape[1], C.shape[1]):
        raise ValueError(f"W must be {C.shape[1]}x{C.shape[1]}, got {W.shape}")
    if np.linalg.eigvalsh(0.5 * (W + W.T))[0] <= 0.0:
        raise ValueError("projector_A needs a positive definite weight")
    return np.eye(W.shape[0]) - _weighted_gain(W, C) @ C


def decompose(x, W, bc: BlockConstraint, d):
    """``A x + (I - A) C^+ d``; returns ``x`` itself whenever ``C x = d``."""
    A = projector_A(W, bc)
    x = np.asarray(x, dtype=float)
    return A @ x + (np.eye(A.shape[0]) - A) @ pseudoinverse(bc.matrix) @ np.asarray(d, float)


def heading_constraint(dest_x, dest_y, theta) -> DestinationConstraint:
    """Arrive at ``(dest_x, dest_y)`` with ``sin(theta) vx = cos(theta) vy``.

    State order is ``(x, vx, y, vy)``. ``theta`` is in radians. The heading
    row ``[0, sin, 0, -cos]`` is the ``[1, -cot]`` form scaled by
    ``sin(theta)``, so it stays defined at ``theta = 0``.
    """
    s, c = np.sin(theta), np.cos(theta)
    # Drop roundoff such as cos(pi/2) ~ 6e-17 so the row is exact at right angles.
    s, c = (0.0 if abs(v) < 1e-15 else float(v) for v in (s, c))
    D = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, s, 0.0, -c],
    ])
    return DestinationConstraint(D, [dest_x, dest_y, 0.0])
