"""Stochastic isospectral midpoint integrator for Lie-Poisson systems."""

__version__ = "0.1.0"

from .algebra import (
    AlgebraSpec,
    adjoint,
    cayley,
    cayley_inv,
    check_algebra,
    check_group,
    commutator,
    frobenius,
    frobenius_norm,
    hat,
    spectrum,
    su2_embed,
    su2_extract,
    so_algebra,
    su_algebra,
    unhat,
)
from .integrator import (
    CotangentState,
    MidpointConfig,
    NonConvergenceError,
    SingularFactorError,
    StepRecord,
    Trajectory,
    cotangent_step,
    momentum_map,
    orbit_witness,
    psi_tilde,
    simulate,
    solve_implicit,
    step,
)
from .models import MODEL_REGISTRY
from .noise import IncrementBlock, NoiseConfig, truncation_threshold

__all__ = [
    "AlgebraSpec",
    "CotangentState",
    "IncrementBlock",
    "MODEL_REGISTRY",
    "MidpointConfig",
    "NoiseConfig",
    "NonConvergenceError",
    "SingularFactorError",
    "StepRecord",
    "Trajectory",
    "adjoint",
    "cayley",
    "cayley_inv",
    "check_algebra",
    "check_group",
    "commutator",
    "cotangent_step",
    "frobenius",
    "frobenius_norm",
    "hat",
    "momentum_map",
    "orbit_witness",
    "psi_tilde",
    "simulate",
    "solve_implicit",
    "spectrum",
    "step",
    "su2_embed",
    "su2_extract",
    "so_algebra",
    "su_algebra",
    "truncation_threshold",
    "unhat",
    "__version__",
]
