"""Ellipsoids as center + shape matrix, and the matrix predicates built on them.

An ellipsoid is the set ``{x : (x - c)^T P^{-1} (x - c) <= 1}``. Singular
shape matrices are allowed; membership then also requires ``x - c`` to lie
in the range of ``P``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-8
LOEWNER_TOL = 1e-8

RADIAL_MODES = ("uniform_ball", "boundary")


def symmetrize(P):
    """Return ``(P + P^T) / 2`` as a float array."""
    P = np.asarray(P, dtype=float)
    return 0.5 * (P + P.T)


def _check_square(P, name="matrix"):
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"{name} must be square, got shape {P.shape}")


def _check_symmetric(P, name="matrix", tol=SYMMETRY_TOL):
    _check_square(P, name)
    scale = 1.0 + (np.max(np.abs(P)) if P.size else 0.0)
    asym = np.max(np.abs(P - P.T)) if P.size else 0.0
    if asym > tol * scale:
        raise ValueError(f"{name} is not symmetric (max asymmetry {asym:.3e})")


def _eigvalsh(P):
    return np.linalg.eigvalsh(symmetrize(P))


def is_psd(P, tol=PSD_TOL):
    """True if the smallest eigenvalue is >= ``-tol * (1 + largest eigenvalue)``."""
    ev = _eigvalsh(P)
    if ev.size == 0:
        return True
    return bool(ev[0] >= -tol * (1.0 + max(ev[-1], 0.0)))


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """Ellipsoid with ``center`` (n,) and symmetric PSD ``shape`` (n, n).

    The shape is symmetrized on construction. Both arrays are stored
    read-only so instances can be shared freely.
    """

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        P = np.array(self.shape, dtype=float)
        _check_square(P, "shape")
        if P.shape[0] != c.size:
            raise ValueError(
                f"center has length {c.size} but shape is {P.shape[0]}x{P.shape[1]}"
            )
        _check_symmetric(P, "shape")
        P = symmetrize(P)
        if not is_psd(P):
            raise ValueError("shape matrix is not positive semidefinite")
        c.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", P)

    @classmethod
    def unit_ball(cls, n):
        return cls(np.zeros(n), np.eye(n))

    @property
    def dim(self):
        return self.center.size

    @property
    def rank(self):
        ev = _eigvalsh(self.shape)
        if ev.size == 0:
            return 0
        cutoff = PSD_TOL * max(ev[-1], 0.0)
        return int(np.sum(ev > cutoff)) if ev[-1] > 0 else 0

    @property
    def degenerate(self):
        """True when the shape matrix is rank deficient."""
        return self.rank < self.dim


def affine_map(E: Ellipsoid, U, b=None) -> Ellipsoid:
    """Image ``U E + b``: center ``U c + b``, shape ``U P U^T``."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[1] != E.dim:
        raise ValueError(f"U has {U.shape[1]} columns, ellipsoid dimension is {E.dim}")
    if b is None:
        b = np.zeros(U.shape[0])
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size != U.shape[0]:
        raise ValueError(f"offset has length {b.size}, expected {U.shape[0]}")
    return Ellipsoid(U @ E.center + b, symmetrize(U @ E.shape @ U.T))


def contains(E: Ellipsoid, x, tol=1e-9) -> bool:
    """Membership test with a relative slack ``tol`` on the quadratic form.

    Uses an eigendecomposition so that singular shapes are handled by the
    pseudoinverse form plus a range condition on ``x - center``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != E.dim:
        raise ValueError(f"point has length {x.size}, ellipsoid dimension is {E.dim}")
    r = x - E.center
    ev, V = np.linalg.eigh(E.shape)
    top = max(ev[-1], 0.0) if ev.size else 0.0
    keep = ev > PSD_TOL * top if top > 0 else np.zeros_like(ev, dtype=bool)
    coords = V.T @ r
    off_range = np.linalg.norm(coords[~keep])
    if off_range > tol * (1.0 + np.linalg.norm(r)):
        return False
    q = float(np.sum(coords[keep] ** 2 / ev[keep]))
    return q <= 1.0 + tol


def _semidefinite_cholesky(P, tol):
    # Unpivoted outer-product Cholesky that zeroes columns with a vanishing pivot.
    n = P.shape[0]
    L = np.zeros_like(P)
    scale = max(np.max(np.abs(np.diag(P))), 0.0) if n else 0.0
    for j in range(n):
        pivot = P[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= tol * scale:
            continue
        L[j, j] = np.sqrt(pivot)
        L[j + 1:, j] = (P[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def factorize(P, tol=PSD_TOL):
    """Lower-triangular ``L`` with ``L @ L.T == P`` for symmetric PSD ``P``.

    Positive definite input goes through LAPACK. Singular PSD input falls
    back to a semidefinite Cholesky that leaves zero columns where the
    pivot vanishes. Indefinite input raises ``ValueError``.
    """
    P = np.asarray(P, dtype=float)
    _check_symmetric(P, "P")
    P = symmetrize(P)
    if not is_psd(P, tol):
        raise ValueError("cannot factorize an indefinite matrix")
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return _semidefinite_cholesky(P, 1e-13)


def sample_point(E: Ellipsoid, rng: np.random.Generator, radial_mode="uniform_ball"):
    """Draw a point of ``E``.

    ``uniform_ball`` is uniform over the volume (direction uniform on the
    sphere, radius ``u**(1/n)``) and needs a nonsingular shape.
    ``boundary`` puts the point on the surface and works for singular
    shapes too, staying in the range of the shape matrix.
    """
    if radial_mode not in RADIAL_MODES:
        raise ValueError(f"unknown radial_mode {radial_mode!r}")
    n = E.dim
    if radial_mode == "uniform_ball" and E.degenerate:
        raise ValueError("uniform_ball sampling needs a positive definite shape")
    L = factorize(E.shape)
    u = rng.standard_normal(n)
    if radial_mode == "boundary":
        y = L @ u
        # Singular L discards part of u; normalize by the part it keeps.
        z = np.linalg.lstsq(L, y, rcond=None)[0] if E.degenerate else u
        nrm = np.linalg.norm(z)
        if nrm == 0.0:
            return E.center.copy()
        return E.center + y / nrm
    u /= np.linalg.norm(u)
    radius = rng.random() ** (1.0 / n)
    return E.center + L @ (radius * u)


def loewner_margin(A, B):
    """Smallest eigenvalue of ``B - A`` (nonnegative iff ``A <= B``)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    _check_symmetric(A, "A", tol=1e-9)
    _check_symmetric(B, "B", tol=1e-9)
    return float(_eigvalsh(B - A)[0])


def loewner_scale(B):
    """The ``1 + max |eig(B)|`` normalizer used by :func:`loewner_leq`."""
    ev = _eigvalsh(B)
    return 1.0 + float(np.max(np.abs(ev))) if ev.size else 1.0


def loewner_leq(A, B, tol=LOEWNER_TOL) -> bool:
    """``A <= B`` in the Loewner order, up to a relative eigenvalue tolerance."""
    return loewner_margin(A, B) >= -tol * loewner_scale(B)
