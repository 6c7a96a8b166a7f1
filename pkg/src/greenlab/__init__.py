"""Boundary-controlled Dirac dynamics on a discretized half-line."""

from .control import (
    Bump,
    ControlSignal,
    DirectSolver,
    FiniteSpeedWarning,
    LiftSolver,
    dirac_oracle,
    lift_control,
    solve_bc_backward,
    solve_bc_direct,
    solve_bc_lift,
)
from .dynamics import Trajectory, duhamel, duhamel_regularized, integrated_trajectory, propagate
from .green import (
    DiscreteGreenSystem,
    build_dirac,
    deficiency_modes,
    extend_self_adjoint,
    green_residual,
)
from .numerics import Grid, NumericsError, SpectralDecomposition, hermitian_eig

__version__ = "0.1.0"

__all__ = [
    "Bump",
    "ControlSignal",
    "DirectSolver",
    "DiscreteGreenSystem",
    "FiniteSpeedWarning",
    "Grid",
    "LiftSolver",
    "NumericsError",
    "SpectralDecomposition",
    "Trajectory",
    "build_dirac",
    "deficiency_modes",
    "dirac_oracle",
    "duhamel",
    "duhamel_regularized",
    "extend_self_adjoint",
    "green_residual",
    "hermitian_eig",
    "integrated_trajectory",
    "lift_control",
    "propagate",
    "solve_bc_backward",
    "solve_bc_direct",
    "solve_bc_lift",
]
