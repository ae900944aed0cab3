"""Destination-constrained state model and trajectory rollouts.

Step ``k`` of the constrained model reads

    x_k = Fbar x_{k-1} + Dbar + Xi w_{k-1} + sum_{j=k}^{N-1} Phi_j w_j

so it consumes future noise terms. Each trajectory therefore draws the
whole stacked noise vector up front and every step reads slices of it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constraint import DestinationConstraint, pseudoinverse
from .dynamics import SystemModel, propagate, transition_product
from .ellipsoid import RADIAL_MODES, contains, sample_point
from .weights import WeightBlocks, gain, optimal_weight

KINDS = ("constrained", "relaxed")


@dataclass(frozen=True, eq=False)
class ReconstructedStep:
    k: int
    Fbar: np.ndarray
    Dbar: np.ndarray
    Xi: np.ndarray
    Phis: list  # Phi_j for j = k .. N-1
    B: np.ndarray


@dataclass(frozen=True, eq=False)
class NoiseDraw:
    """Stacked noise ``(w_0, ..., w_{N-1})`` for one trajectory."""

    w0: np.ndarray

    def __post_init__(self):
        w = np.array(self.w0, dtype=float).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "w0", w)

    def blocks(self, n):
        """Noise vectors as an ``(N, n)`` array."""
        return self.w0.reshape(-1, n)


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray  # (N + 1, n)
    kind: str = "constrained"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")

    @property
    def terminal(self):
        return self.states[-1]


def build_step(sys: SystemModel, dc: DestinationConstraint, W: WeightBlocks, k) -> ReconstructedStep:
    """Coefficients of constrained step ``k`` (``1 <= k <= N``) under weight ``W``."""
    if not 1 <= k <= sys.horizon:
        raise ValueError(f"step k={k} outside 1..{sys.horizon}")
    n = sys.dim
    B = gain(W, dc)
    Xi = np.eye(n) - B @ transition_product(sys, k, sys.horizon)
    Phis = [-B @ transition_product(sys, j + 1, sys.horizon) for j in range(k, sys.horizon)]
    return ReconstructedStep(
        k=k,
        Fbar=Xi @ sys.transitions[k - 1],
        Dbar=B @ pseudoinverse(dc.D) @ dc.d,
        Xi=Xi,
        Phis=Phis,
        B=B,
    )


def step(x_prev, rs: ReconstructedStep, draw: NoiseDraw, k=None):
    """Advance one constrained step, reading ``w_{k-1} .. w_{N-1}`` from ``draw``."""
    k = rs.k if k is None else k
    if k != rs.k:
        raise ValueError(f"step coefficients are for k={rs.k}, not k={k}")
    x_prev = np.asarray(x_prev, dtype=float)
    w = draw.blocks(x_prev.size)
    x = rs.Fbar @ x_prev + rs.Dbar + rs.Xi @ w[k - 1]
    for j, Phi in enumerate(rs.Phis, start=k):
        x = x + Phi @ w[j]
    return x


def resolve_weights(sys: SystemModel, weight_mode) -> list:
    """Per-step weights ``[W_1, ..., W_N]`` for a mode name or explicit list."""
    if isinstance(weight_mode, str):
        if weight_mode == "optimal":
            return [optimal_weight(sys, k) for k in range(1, sys.horizon + 1)]
        if weight_mode == "identity":
            return [WeightBlocks.identity(sys.dim)] * sys.horizon
        raise ValueError(f"unknown weight mode {weight_mode!r}")
    weights = list(weight_mode)
    if len(weights) != sys.horizon:
        raise ValueError(f"need {sys.horizon} weights, got {len(weights)}")
    return weights


def build_model(sys: SystemModel, dc: DestinationConstraint, weight_mode="optimal") -> list:
    """All step coefficients ``[step_1, ..., step_N]``; reusable across draws."""
    weights = resolve_weights(sys, weight_mode)
    return [build_step(sys, dc, W, k) for k, W in enumerate(weights, start=1)]


def rollout(sys: SystemModel, dc: DestinationConstraint, weight_mode, x0, draw: NoiseDraw,
            steps: Sequence[ReconstructedStep] | None = None) -> Trajectory:
    """Iterate the constrained model from ``x0`` for ``N`` steps.

    Pass precomputed ``steps`` (from :func:`build_model`) to skip rebuilding
    coefficients when rolling out many draws.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size != sys.dim:
        raise ValueError(f"x0 has length {x.size}, state dimension is {sys.dim}")
    if steps is None:
        steps = build_model(sys, dc, weight_mode)
    states = [x]
    for rs in steps:
        x = step(x, rs, draw)
        states.append(x)
    return Trajectory(np.array(states), "constrained")


def rollout_unconstrained(sys: SystemModel, x0, draw: NoiseDraw) -> Trajectory:
    """Plain ``x_k = F_{k-1} x_{k-1} + w_{k-1}``."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != sys.dim:
        raise ValueError(f"x0 has length {x0.size}, state dimension is {sys.dim}")
    return Trajectory(propagate(sys, x0, draw.blocks(sys.dim)), "relaxed")


def zero_draw(sys: SystemModel) -> NoiseDraw:
    return NoiseDraw(np.zeros(sys.dim * sys.horizon))


def draw_noise(sys: SystemModel, rng: np.random.Generator, radial_mode="uniform_ball") -> NoiseDraw:
    """Sample a stacked noise vector from the ellipsoid ``(0, Q_w0)``."""
    if radial_mode not in RADIAL_MODES:
        raise ValueError(f"unknown radial_mode {radial_mode!r}")
    E = sys.noise_ellipsoid()
    w0 = sample_point(E, rng, radial_mode)
    if not contains(E, w0, 1e-9):
        raise RuntimeError("sampled noise left its ellipsoid")
    return NoiseDraw(w0)


def trajectory_rng(seed, trajectory_id) -> np.random.Generator:
    """Independent stream per ``(seed, trajectory_id)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trajectory_id)]))


def eta(sys: SystemModel, rs: ReconstructedStep, draw: NoiseDraw):
    """Total noise injected by step ``rs.k``: ``Xi w_{k-1} + sum Phi_j w_j``."""
    w = draw.blocks(sys.dim)
    out = rs.Xi @ w[rs.k - 1]
    for j, Phi in enumerate(rs.Phis, start=rs.k):
        out = out + Phi @ w[j]
    return out

