"""Gaussian-bump inverse design: flow, objective, FFD and mesh movement wired together."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .cost_model import CostLedger
from .euler.mesh import bump_height, bump_mesh
from .euler.objective import BoundaryTrace, WallObjective
from .euler.residual import EulerDG
from .euler.solver import PtcConfig, solve_flow
from .ffd import FfdBox, WallParameterization
from .linalg import IlutParams, IlutPreconditioner, KrylovConfig, fgmres
from .mesh_elasticity import ChainedSensitivity, ElasticityParams, ElasticitySystem

log = logging.getLogger(__name__)


@dataclass
class BumpConfig:
    p: int = 1
    nx: int = 32
    ny: int = 8
    n_design: int = 20
    h_init: float = 0.0625
    h_target: float = 0.03125
    flow_tol: float = 1e-11
    linear_rtol: float = 1e-10
    linear_max_iters: int = 1000
    target: str = "fitted"  # "fitted": FFD fit of the target bump; "exact": separately meshed bump
    ilut: IlutParams = field(default_factory=IlutParams)

    @property
    def n_state(self):
        return self.nx * self.ny * (self.p + 1) ** 2 * 4

    def as_dict(self):
        d = asdict(self)
        d["ilut"] = asdict(self.ilut)
        return d


class JacobianSolver:
    """Forward and adjoint solves sharing one ILUT factorization of ``A``.

    ``solve``/``solve_transpose`` run ILUT-preconditioned GMRES to
    ``rtol``; ``precondition``/``precondition_transpose`` apply the ILUT
    factors once. Every call is charged to the ledger. If GMRES fails the
    system is solved with a sparse LU factorization and ``direct_solves``
    is incremented.
    """

    def __init__(self, A, ledger: CostLedger | None = None, rtol=1e-10, max_iters=1000,
                 ilut: IlutParams = IlutParams()):
        self.A = A.tocsr()
        self.AT = self.A.T.tocsr()
        self.pc = IlutPreconditioner(self.A, ilut)
        self.ledger = ledger
        self.rtol = rtol
        self.max_iters = max_iters
        self.iterations = {"forward": 0, "adjoint": 0}
        self.solves = {"forward": 0, "adjoint": 0}
        self.direct_solves = 0
        self._lu = None

    def _run(self, kind, op, pc, b):
        res = fgmres(op, b, pc, KrylovConfig(rel_tol=self.rtol, max_iters=self.max_iters,
                                             restart=200, flexible=False))
        self.solves[kind] += 1
        self.iterations[kind] += res.iters
        if self.ledger is not None:
            self.ledger.solve(kind, res.iters)
        if res.converged:
            return res.x
        log.warning("%s GMRES stalled (%s, %d its); using sparse LU", kind, res.status, res.iters)
        self.direct_solves += 1
        if self._lu is None:
            self._lu = spla.splu(self.A.tocsc())
        return self._lu.solve(b, trans="T" if kind == "adjoint" else "N")

    def solve(self, b):
        return self._run("forward", self.A.dot, self.pc.solve, np.asarray(b, dtype=float))

    def solve_transpose(self, b):
        return self._run("adjoint", self.AT.dot, self.pc.solve_transpose, np.asarray(b, dtype=float))

    def precondition(self, b):
        if self.ledger is not None:
            self.ledger.charge("precond_apply")
        return self.pc.solve(np.asarray(b, dtype=float))

    def precondition_transpose(self, b):
        if self.ledger is not None:
            self.ledger.charge("precond_apply")
        return self.pc.solve_transpose(np.asarray(b, dtype=float))


def exact_target_trace(cfg: BumpConfig) -> BoundaryTrace:
    """Lower-wall trace of the flow over a separately meshed target bump."""
    disc = bump_mesh(cfg.nx, cfg.ny, cfg.p, h=cfg.h_target)
    model = EulerDG(disc)
    res = solve_flow(model, model.freestream_state(), disc.x0, PtcConfig(tol=cfg.flow_tol))
    return BoundaryTrace.from_solution(model, res.u, disc.x0)


class ShapeProblem:
    """State, design and mesh bookkeeping shared by both optimizers.

    The volume mesh is ``x(z) = x0 + G z`` with ``G`` the chained elasticity
    and FFD sensitivity, exact because both maps are linear.
    """

    def __init__(self, cfg: BumpConfig | None = None, target: BoundaryTrace | None = None,
                 ledger: CostLedger | None = None, elasticity: ElasticityParams | None = None):
        self.cfg = cfg or BumpConfig()
        c = self.cfg
        self.disc = bump_mesh(c.nx, c.ny, c.p, h=c.h_init)
        self.model = EulerDG(self.disc)
        self.box = FfdBox.for_bump(c.n_design)
        self.param = WallParameterization(self.disc, self.box)
        self.elasticity = ElasticitySystem(self.disc, elasticity)
        self.G = ChainedSensitivity(self.elasticity, self.param.jacobian)
        self.x0 = self.disc.x0
        self.flow_direct_solves = 0
        if target is None:
            if c.target == "fitted":
                target = self.fitted_target()
            elif c.target == "exact":
                target = exact_target_trace(c)
            else:
                raise ValueError(f"unknown target mode {c.target!r}")
        self.target = target
        self.objective = WallObjective(self.model, self.target)
        self.ledger = ledger or CostLedger(c.p)
        self.model.ledger = self.ledger

    def fit_design(self, h, rcond=1e-6):
        """Least-squares design reproducing the wall ``y = h exp(-25 x^2)``.

        The Bernstein lattice is badly conditioned, so singular values below
        ``rcond`` times the largest are truncated to keep the design moderate.
        """
        wn = self.param.nodes
        xs, ys = self.disc.nodes[wn, 0], self.disc.nodes[wn, 1]
        J = self.param.jacobian.toarray()[2 * wn + 1]
        z, *_ = np.linalg.lstsq(J, bump_height(xs, h) - ys, rcond=rcond)
        return z

    def fitted_target(self) -> BoundaryTrace:
        """Wall trace of the flow on the mesh of the best FFD fit to the target bump.

        The target is then exactly attainable, so the optimum has zero objective.
        """
        self.z_target = self.fit_design(self.cfg.h_target)
        x = self.mesh(self.z_target)
        res = solve_flow(self.model, self.model.freestream_state(), x, PtcConfig(tol=self.cfg.flow_tol))
        return BoundaryTrace.from_solution(self.model, res.u, x)

    @property
    def n(self):
        return self.cfg.n_design

    @property
    def n_state(self):
        return self.disc.n_state

    def mesh(self, z):
        x = self.x0 + self.G.dot(z)
        self.disc.check_valid(x)
        return x

    def solve_flow(self, x, u0=None):
        """Converge the flow on mesh ``x``; warm starts use ILUT-GMRES at high CFL."""
        if u0 is None:
            cfg = PtcConfig(tol=self.cfg.flow_tol)
            u0 = self.model.freestream_state()
        else:
            cfg = PtcConfig(tol=self.cfg.flow_tol, cfl0=1e6, linear_solver="auto",
                            linear_rtol=self.cfg.linear_rtol, ilut=self.cfg.ilut)
        res = solve_flow(self.model, u0, x, cfg)
        for its in res.linear_iterations:
            self.ledger.solve("forward", max(its, 0))
        self.flow_direct_solves += res.direct_solves
        return res.u

    def jacobian_solver(self, A):
        return JacobianSolver(A, self.ledger, self.cfg.linear_rtol, self.cfg.linear_max_iters, self.cfg.ilut)

    def Rz(self, Rx, v):
        return Rx @ self.G.dot(v)

    def RzT(self, Rx_T, w):
        return self.G.rdot(Rx_T @ w)
