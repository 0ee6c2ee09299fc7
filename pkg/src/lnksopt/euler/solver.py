"""Steady flow solver: pseudo-transient continuation with backward Euler steps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..linalg import IlutParams, IlutPreconditioner, KrylovConfig, fgmres
from .gas import NonPhysicalStateError
from .residual import EulerDG

log = logging.getLogger(__name__)


class FlowDivergenceError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


@dataclass
class PtcConfig:
    tol: float = 1e-11
    max_steps: int = 200
    cfl0: float = 10.0
    cfl_max: float = 1e14
    ser_exponent: float = 1.5
    # "direct" (sparse LU), "ilut" (ILUT-GMRES) or "auto" (ILUT-GMRES, LU on failure)
    linear_solver: str = "direct"
    linear_rtol: float = 1e-8
    linear_max_iters: int = 600
    max_halvings: int = 8
    ilut: IlutParams = field(default_factory=IlutParams)


@dataclass
class FlowResult:
    u: np.ndarray
    converged: bool
    steps: int
    history: list
    linear_iterations: list
    direct_solves: int = 0


def add_to_pattern(A, D):
    """``A + D`` on the stored pattern of ``A`` (explicit zeros kept).

    ILUT sizes its per-row fill budget from the stored pattern, so keeping the
    structural zeros of the assembled Jacobian keeps the factorization stable.
    ``D`` must not have entries outside that pattern.
    """
    A = sp.csr_matrix(A)
    S = (A + D).tocsr()
    rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    vals = np.asarray(S[rows, A.indices]).ravel()
    return sp.csr_matrix((vals, A.indices.copy(), A.indptr.copy()), shape=A.shape)


def solve_linear(A, b, method="ilut", rtol=1e-8, max_iters=600, ilut=IlutParams(), transpose=False):
    """Solve ``A x = b`` (or ``A^T x = b``); returns ``(x, iterations)``.

    Direct solves report zero iterations. ``method="auto"`` tries ILUT-GMRES
    and falls back to the direct solve, reporting ``-1`` iterations then.
    """
    if method == "direct":
        lu = spla.splu(sp.csc_matrix(A))
        return lu.solve(b, trans="T" if transpose else "N"), 0
    if method == "auto":
        try:
            return solve_linear(A, b, "ilut", rtol, max_iters, ilut, transpose)
        except RuntimeError:
            return solve_linear(A, b, "direct", transpose=transpose)[0], -1
    M = A.T.tocsr() if transpose else A
    pc = IlutPreconditioner(M, ilut)
    res = fgmres(M.dot, b, pc.solve, KrylovConfig(rel_tol=rtol, max_iters=max_iters, restart=200,
                                                  flexible=False))
    if not res.converged:
        raise RuntimeError(f"ILUT-GMRES did not converge ({res.status}, {res.iters} iterations, "
                           f"residual {res.residual_norm:.3e})")
    return res.x, res.iters


def local_time_scale(model: EulerDG, u, x):
    """Cell size over maximum wave speed, per cell."""
    d = model.disc
    uc = d.state_view(u).mean(axis=1)
    r = uc[:, 0]
    v = np.hypot(uc[:, 1], uc[:, 2]) / r
    p = (model.fs.gamma - 1.0) * (uc[:, 3] - 0.5 * r * v * v)
    c = np.sqrt(model.fs.gamma * np.maximum(p, 1e-300) / r)
    det = d.det_jacobian(x)
    area = det @ d.ref.wq
    return np.sqrt(area) / (v + c)


def solve_flow(model: EulerDG, u0, x, cfg: PtcConfig | None = None, callback=None):
    """Drive ``R(u, x)`` to ``cfg.tol`` (2-norm) from ``u0``.

    Each step solves ``(M/dt + R_u) du = -R`` with a local time step
    ``dt = CFL h/(|v|+c)`` and CFL growing like ``(|R_0|/|R|)^ser_exponent``.
    A backtracking search on ``|R|`` and state physicality guards each update.
    """
    cfg = cfg or PtcConfig()
    d = model.disc
    u = np.array(u0, dtype=float)
    x = np.asarray(x, dtype=float)
    R = model.residual(u, x)
    rnorm = np.linalg.norm(R)
    history = [rnorm]
    lin_its = []
    direct = 0
    if rnorm <= cfg.tol:
        return FlowResult(u, True, 0, history, lin_its)

    Mc = model.cell_mass(x)
    r0 = rnorm
    scale = 1.0
    blk = 4 * d.n_p
    for step in range(1, cfg.max_steps + 1):
        cfl = min(cfg.cfl_max, scale * cfg.cfl0 * (r0 / rnorm) ** cfg.ser_exponent)
        _, mats = model.jacobians(u, x, ("u",))
        Ru = mats["u"]
        accepted = False
        for _attempt in range(6):
            dt = cfl * local_time_scale(model, u, x)
            blocks = np.einsum("eij,cd->eicjd", Mc / dt[:, None, None], np.eye(4)).reshape(d.n_cells, blk, blk)
            A = add_to_pattern(Ru, sp.block_diag(list(blocks), format="csr"))
            try:
                du, its = solve_linear(A, -R, cfg.linear_solver, cfg.linear_rtol,
                                       cfg.linear_max_iters, cfg.ilut)
            except RuntimeError as exc:
                log.debug("linear solve failed at step %d: %s", step, exc)
                cfl *= 0.1
                scale *= 0.1
                continue
            lin_its.append(its)
            direct += its <= 0
            alpha = 1.0
            for _ in range(cfg.max_halvings + 1):
                trial = u + alpha * du
                try:
                    Rt = model.residual(trial, x)
                    tnorm = np.linalg.norm(Rt)
                except (NonPhysicalStateError, ValueError, FloatingPointError):
                    tnorm = np.inf
                if np.isfinite(tnorm) and tnorm < rnorm * (1.0 - 1e-4 * alpha) or tnorm <= cfg.tol:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
            cfl *= 0.1
            scale *= 0.1
        if not accepted:
            raise FlowDivergenceError(f"time-step floor reached at step {step}", history)
        u, R, rnorm = trial, Rt, tnorm
        history.append(rnorm)
        scale = scale * 0.5 if alpha < 1.0 else min(1.0, scale * 2.0)
        if callback is not None:
            callback(step, u, rnorm)
        log.debug("ptc step %d |R|=%.3e cfl=%.2e alpha=%.3f", step, rnorm, cfl, alpha)
        if rnorm <= cfg.tol:
            return FlowResult(u, True, step, history, lin_its, int(direct))
    raise FlowDivergenceError(f"no convergence in {cfg.max_steps} steps", history)
