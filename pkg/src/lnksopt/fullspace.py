"""Full-space (LNKS) optimizer: Newton on the KKT conditions with FGMRES and P2/P4 preconditioning."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .euler.solver import add_to_pattern
from .kkt import CompositeKktVector, KktBlocks, apply_p2_inverse, apply_p4_inverse
from .linalg import KrylovConfig, fgmres
from .problem import ShapeProblem
from .quasi_newton import Bfgs, LineSearchError, armijo
from .reduced import OptimizationResult
from .telemetry import make_row

log = logging.getLogger(__name__)

PRECONDITIONERS = ("P4", "P2", "P4t", "P2t")


def penalty(lz_norm, c1=0.01, mu_max=1e8):
    """Augmented-Lagrangian penalty ``c1 / |L_z|`` capped at ``mu_max``."""
    if lz_norm <= c1 / mu_max:
        return mu_max
    return c1 / lz_norm


@dataclass
class FullSpaceConfig:
    preconditioner: str = "P4"
    max_cycles: int = 30
    kkt_rtol: float = 1e-6
    kkt_atol: float = 1e-10
    krylov_rtol: float = 1e-6
    krylov_max_iters: int = 600
    krylov_restart: int = 200
    c1: float = 1e-4
    penalty_c1: float = 0.01
    mu_max: float = 1e8
    ptc_drop: float = 1e-8
    max_halvings: int = 30


class KktPoint:
    """Residuals, Jacobians and Lagrangian derivatives at ``(u, z, lambda)``."""

    def __init__(self, problem: ShapeProblem, u, z, lam, ptc_drop=1e-8):
        self.problem = problem
        self.u, self.z, self.lam = u, z, lam
        self.x = x = problem.mesh(z)
        model, G = problem.model, problem.G
        D = model.residual_derivatives(u, x, lam, ("uu", "ux", "xx"))
        O = problem.objective.derivatives(u, x, ("uu", "ux", "xx"))
        self.R = D["R"]
        self.Ru, self.Rx = D["u"], D["x"]
        self.RxT = self.Rx.T.tocsr()
        self.I = O["I"]
        self.Luu = (D["uu"] + O["uu"]).tocsr()
        self.Lux = (D["ux"] + O["ux"]).tocsr()
        self.Lxu = self.Lux.T.tocsr()
        self.Lxx = (D["xx"] + O["xx"]).tocsr()
        self.Lu = O["u"] + self.Ru.T @ lam
        self.Lz = G.rdot(O["x"] + self.RxT @ lam)
        self.r_norm = float(np.linalg.norm(self.R))
        # pseudo-transient continuation: R_u + M / dt with dt = 1 / |R|^2
        if self.r_norm >= ptc_drop:
            M = model.mass_matrix(x)
            self.ptc_scale = self.r_norm ** 2
            self.Ru_plus = add_to_pattern(self.Ru, self.ptc_scale * M)
            self.ptc_norm = float(spla.norm(M, np.inf) * self.ptc_scale)
        else:
            self.ptc_scale = 0.0
            self.Ru_plus = self.Ru.tocsr()
            self.ptc_norm = 0.0
        self.RuT_plus = self.Ru_plus.T.tocsr()

    @property
    def residual(self) -> CompositeKktVector:
        return CompositeKktVector(self.Lu, self.Lz, self.R)

    def merit(self, mu):
        return float(self.I + self.lam @ self.R + 0.5 * mu * self.R @ self.R)

    def blocks(self, variant, bfgs: Bfgs, solver) -> KktBlocks:
        """Ledger-charged block actions; flow-Jacobian solves per ``variant``."""
        p = self.problem
        G, led = p.G, p.ledger

        def charged(event, f):
            def g(v):
                led.charge(event)
                return f(v)
            return g

        if variant in ("P4", "P2"):
            Ru_solve, RuT_solve = solver.solve, solver.solve_transpose
        else:
            Ru_solve, RuT_solve = solver.precondition, solver.precondition_transpose
        return KktBlocks(
            n_s=len(self.u), n=len(self.z),
            Luu=charged("matvec_R_uu", lambda v: self.Luu @ v),
            Luz=charged("matvec_R_ux", lambda v: self.Lux @ G.dot(v)),
            Lzu=charged("matvec_R_ux", lambda v: G.rdot(self.Lxu @ v)),
            Lzz=charged("matvec_R_xx", lambda v: G.rdot(self.Lxx @ G.dot(v))),
            Ru=charged("matvec_R_u", lambda v: self.Ru_plus @ v),
            RuT=charged("matvec_R_u", lambda v: self.RuT_plus @ v),
            Rz=charged("matvec_R_x", lambda v: self.Rx @ G.dot(v)),
            RzT=charged("matvec_R_x", lambda v: G.rdot(self.RxT @ v)),
            Ru_solve=Ru_solve, RuT_solve=RuT_solve, B_solve=bfgs.apply_inverse)


class FullSpaceOptimizer:
    """LNKS design cycles with an augmented-Lagrangian line search."""

    def __init__(self, problem: ShapeProblem, cfg: FullSpaceConfig | None = None):
        self.problem = problem
        self.cfg = cfg or FullSpaceConfig()
        if self.cfg.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.cfg.preconditioner!r}")
        self.bfgs = Bfgs(problem.n)

    def point(self, u, z, lam) -> KktPoint:
        return KktPoint(self.problem, u, z, lam, self.cfg.ptc_drop)

    def kkt_residual(self, u, z, lam) -> CompositeKktVector:
        """First-order optimality residual ``(L_u, L_z, R)``."""
        p = self.problem
        x = p.mesh(z)
        R, J = p.model.jacobians(u, x, ("u", "x"))
        _, Iu, Ix = p.objective.gradients(u, x)
        return CompositeKktVector(Iu + J["u"].T @ lam, p.G.rdot(Ix + J["x"].T @ lam), R)

    def initial_state(self, z0=None, u0=None):
        """Converged flow and adjoint at the starting design."""
        p = self.problem
        z = np.zeros(p.n) if z0 is None else np.asarray(z0, dtype=float).copy()
        x = p.mesh(z)
        u = p.solve_flow(x, u0)
        _, J = p.model.jacobians(u, x, ("u",))
        _, Iu, _ = p.objective.gradients(u, x)
        lam = p.jacobian_solver(J["u"]).solve_transpose(-Iu)
        return u, z, lam

    def search_direction(self, pt: KktPoint):
        """Solve ``K p = -r`` by right-preconditioned FGMRES; returns ``(p, result)``."""
        cfg, p = self.cfg, self.problem
        solver = p.jacobian_solver(pt.Ru_plus)
        blk = pt.blocks(cfg.preconditioner, self.bfgs, solver)
        n_s, n = blk.n_s, blk.n
        apply_p = apply_p4_inverse if cfg.preconditioner.startswith("P4") else apply_p2_inverse

        def precond(v):
            return apply_p(blk, CompositeKktVector.from_flat(v, n_s, n)).flat

        rhs = -pt.residual.flat
        res = fgmres(blk.apply_flat, rhs, precond,
                     KrylovConfig(rel_tol=cfg.krylov_rtol, max_iters=cfg.krylov_max_iters,
                                  restart=cfg.krylov_restart, flexible=True))
        self.solver = solver
        return CompositeKktVector.from_flat(res.x, n_s, n), res

    def merit_slope(self, pt: KktPoint, d: CompositeKktVector, lam, mu):
        """Derivative along ``(d_u, d_z)`` of ``I + lam.R + mu/2 |R|^2`` at fixed ``lam``."""
        G = self.problem.G
        dlam = lam - pt.lam
        Lu = pt.Lu + pt.Ru.T @ dlam + mu * (pt.Ru.T @ pt.R)
        Lz = pt.Lz + G.rdot(pt.RxT @ (dlam + mu * pt.R))
        return float(Lu @ d.u + Lz @ d.z)

    def trial_merit(self, u, z, lam, mu):
        p = self.problem
        x = p.mesh(z)
        R = p.model.residual(u, x)
        I = p.objective.value(u, x)
        return float(I + lam @ R + 0.5 * mu * R @ R)

    def run(self, z0=None, u0=None, callback=None) -> OptimizationResult:
        cfg, p = self.cfg, self.problem
        u, z, lam = self.initial_state(z0, u0)
        pt = self.point(u, z, lam)
        r0 = pt.residual.norm()
        tol = max(cfg.kkt_atol, cfg.kkt_rtol * r0)
        history = []

        def record(cycle, subits, alpha, mu, lz_norm, merit_start, merit, note):
            row = make_row(p.ledger, cycle=cycle, grad_norm=pt.residual.norm(), objective=float(pt.I),
                           subiterations=int(subits), alpha=float(alpha), constraint_norm=pt.r_norm,
                           mu=float(mu), lz_norm=float(lz_norm), merit_start=float(merit_start), merit=float(merit), ptc_norm=pt.ptc_norm, note=note)
            history.append(row)
            if callback is not None:
                callback(row)

        lz = np.linalg.norm(pt.Lz)
        mu = penalty(lz, cfg.penalty_c1, cfg.mu_max)
        record(0, 0, 0.0, mu, lz, pt.merit(mu), pt.merit(mu), "")
        for cycle in range(1, cfg.max_cycles + 1):
            if pt.residual.norm() <= tol:
                return OptimizationResult(z, u, True, cycle - 1, history, "converged", lam=lam)
            lz = np.linalg.norm(pt.Lz)  # mu and lz describe the point the step starts from
            mu = penalty(lz, cfg.penalty_c1, cfg.mu_max)
            d, kres = self.search_direction(pt)
            note = "" if kres.converged else f"FGMRES {kres.status}"
            # the multiplier takes its full Newton step; the merit at the new
            # multiplier estimate is then backtracked along (d_u, d_z)
            lam_new = lam + d.lam
            phi0 = float(pt.I + lam_new @ pt.R + 0.5 * mu * pt.R @ pt.R)
            slope = self.merit_slope(pt, d, lam_new, mu)

            def trial(alpha, u=u, z=z):
                ut, zt = u + alpha * d.u, z + alpha * d.z
                return self.trial_merit(ut, zt, lam_new, mu), (ut, zt, lam_new)

            try:
                ls = armijo(trial, phi0, slope, cfg.c1, 0.5, cfg.max_halvings)
            except LineSearchError as exc:
                record(cycle, kres.iters, 0.0, mu, lz, phi0, phi0, f"line search failed: {exc.trials[-1]}")
                return OptimizationResult(z, u, False, cycle, history, str(exc), lam=lam)
            u_new, z_new, lam_new = ls.payload
            new = self.point(u_new, z_new, lam_new)
            self.bfgs.update(z_new - z, new.Lz - pt.Lz)
            u, z, lam, pt = u_new, z_new, lam_new, new
            record(cycle, kres.iters, ls.alpha, mu, lz, phi0, ls.value, note)
        converged = pt.residual.norm() <= tol
        return OptimizationResult(z, u, bool(converged), cfg.max_cycles, history,
                                  "converged" if converged else "maximum cycles reached", lam=lam)
