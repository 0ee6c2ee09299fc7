"""Orders-of-accuracy study: entropy error of the subsonic bump flow under refinement."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .euler.mesh import bump_mesh
from .euler.residual import EulerDG
from .euler.solver import FlowDivergenceError, PtcConfig, solve_flow

log = logging.getLogger(__name__)

# grids keep nx:ny = 4:1
GRIDS = {16: (8, 2), 64: (16, 4), 256: (32, 8), 1024: (64, 16), 4096: (128, 32)}


@dataclass
class AccuracyRow:
    p: int
    cells: int
    dofs: int
    error: float
    rate: float  # NaN for the coarsest grid of each degree
    converged: bool

    def as_list(self):
        return [self.p, self.cells, self.dofs, self.error, self.rate, int(self.converged)]


COLUMNS = ("p", "cells", "dofs", "entropy_error", "rate", "converged")


def entropy_error(p, cells, h=0.0625, tol=1e-11, constant_state=False):
    """Entropy error of the converged flow; returns ``(error, dofs, converged)``."""
    if cells not in GRIDS:
        raise ValueError(f"no {cells}-cell grid; choose from {sorted(GRIDS)}")
    nx, ny = GRIDS[cells]
    disc = bump_mesh(nx, ny, p, h=h)
    model = EulerDG(disc)
    dofs = disc.n_cells * disc.n_p
    u = model.freestream_state()
    if constant_state:
        return model.entropy_error(u, disc.x0), dofs, True
    try:
        res = solve_flow(model, u, disc.x0, PtcConfig(tol=tol))
    except FlowDivergenceError as exc:
        log.warning("p=%d, %d cells diverged: %s", p, cells, exc)
        return math.nan, dofs, False
    return model.entropy_error(res.u, disc.x0), dofs, res.converged


def observed_rate(e_coarse, e_fine, refinement=2.0):
    """Convergence rate between two grids whose spacing differs by ``refinement``."""
    if not (e_coarse > 0 and e_fine > 0):
        return math.nan
    return math.log(e_coarse / e_fine) / math.log(refinement)


def run_accuracy_study(p_list, cell_list, constant_state=False, tol=1e-11):
    """Rows ordered by degree then grid; rates between successive grids."""
    rows = []
    cells_sorted = sorted(cell_list)
    for p in p_list:
        prev = None
        for cells in cells_sorted:
            err, dofs, ok = entropy_error(p, cells, tol=tol, constant_state=constant_state)
            rate = math.nan
            if prev is not None:
                rate = observed_rate(prev[1], err, math.sqrt(cells / prev[0]))
            rows.append(AccuracyRow(p, cells, dofs, float(err), rate, ok))
            prev = (cells, err)
    return rows
