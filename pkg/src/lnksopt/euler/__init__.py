"""Steady 2D compressible Euler equations discretized by discontinuous Galerkin.

Tensor-product Lagrange elements on curved quadrilaterals, Roe fluxes with a
Harten entropy fix, exact first and second derivatives through vectorized
jets, and a pseudo-transient Newton solver.
"""

from .mesh import DgDiscretization, InvalidMeshError, bump_height, bump_mesh
from .objective import BoundaryTrace, TargetRangeError, WallObjective
from .residual import EulerDG
from .solver import FlowDivergenceError, PtcConfig, solve_flow

__all__ = [
    "BoundaryTrace", "DgDiscretization", "EulerDG", "FlowDivergenceError", "InvalidMeshError", "PtcConfig",
    "TargetRangeError", "WallObjective", "bump_height", "bump_mesh", "solve_flow",
]
