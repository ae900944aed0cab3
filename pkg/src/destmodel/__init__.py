"""Destination-constrained linear system models under ellipsoidal bounded noise."""
from .constraint import BlockConstraint, DestinationConstraint, heading_constraint
from .dynamics import SystemModel
from .ellipsoid import Ellipsoid, affine_map, contains, factorize, loewner_leq, sample_point
from .reconstruct import (
    NoiseDraw,
    ReconstructedStep,
    Trajectory,
    build_step,
    draw_noise,
    rollout,
    rollout_unconstrained,
    trajectory_rng,
)
from .weights import WeightBlocks, optimal_weight, process_noise_shape

__version__ = "0.1.0"
