"""Reduced-space optimization: adjoint gradients, Hessian-vector products, Newton-Krylov and BFGS."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .linalg import KrylovConfig, fgmres
from .problem import ShapeProblem
from .quasi_newton import Bfgs, LineSearchError, armijo
from .telemetry import make_row

log = logging.getLogger(__name__)



class Linearization:
    """Flow, adjoint and second-order data at one converged design point."""

    def __init__(self, problem: ShapeProblem, z, x, u):
        self.problem = problem
        self.z, self.x, self.u = z, x, u
        model, obj, ledger = problem.model, problem.objective, problem.ledger
        _, J = model.jacobians(u, x, ("u", "x"))
        self.Ru, self.Rx = J["u"], J["x"]
        self.RxT = self.Rx.T.tocsr()
        self.I, self.Iu, self.Ix = obj.gradients(u, x)
        self.solver = problem.jacobian_solver(self.Ru)
        self.lam = self.solver.solve_transpose(-self.Iu)
        ledger.charge("matvec_R_x")
        self.g = problem.G.rdot(self.Ix + self.RxT @ self.lam)
        self._second = None

    # -- products charged to the ledger ---------------------------------------
    def Rz(self, v):
        self.problem.ledger.charge("matvec_R_x")
        return self.Rx @ self.problem.G.dot(v)

    def RzT(self, w):
        self.problem.ledger.charge("matvec_R_x")
        return self.problem.G.rdot(self.RxT @ w)

    def second_order(self):
        """``L_uu``, ``L_ux`` and ``L_xx`` (objective plus dual-weighted residual)."""
        if self._second is None:
            p = self.problem
            D = p.model.residual_derivatives(self.u, self.x, self.lam, ("uu", "ux", "xx"))
            O = p.objective.derivatives(self.u, self.x, ("uu", "ux", "xx"))
            Lux = (D["ux"] + O["ux"]).tocsr()
            self._second = {"uu": (D["uu"] + O["uu"]).tocsr(), "ux": Lux, "xu": Lux.T.tocsr(),
                            "xx": (D["xx"] + O["xx"]).tocsr()}
        return self._second

    def hessian_vector(self, v):
        """Reduced Hessian times ``v`` with one forward and one adjoint solve."""
        v = np.asarray(v, dtype=float)
        L = self.second_order()
        G, ledger = self.problem.G, self.problem.ledger
        xv = G.dot(v)
        w = -self.solver.solve(self.Rz(v))
        ledger.charge("matvec_R_ux")
        ledger.charge("matvec_R_uu")
        t = L["ux"] @ xv + L["uu"] @ w
        s = -self.RzT(self.solver.solve_transpose(t))
        ledger.charge("matvec_R_xx")
        ledger.charge("matvec_R_ux")
        return G.rdot(L["xx"] @ xv + L["xu"] @ w) + s


@dataclass
class ReducedConfig:
    method: str = "newton"  # "newton" or "bfgs"
    # Newton-GMRES preconditioner: "within" rebuilds an identity-initialized BFGS
    # model from the Hessian-vector pairs of each solve; "across" reuses the
    # model updated with (step, gradient change) pairs between cycles.
    newton_preconditioner: str = "within"
    max_cycles: int = 50
    grad_rtol: float = 1e-6
    grad_atol: float = 1e-10
    krylov_rtol: float = 1e-6
    c1: float = 1e-4
    max_halvings: int = 30


@dataclass
class OptimizationResult:
    z: np.ndarray
    u: np.ndarray
    converged: bool
    cycles: int
    history: list = field(default_factory=list)
    message: str = ""
    lam: np.ndarray | None = None


class ReducedSpaceOptimizer:
    """Design cycles with full flow re-convergence before every search direction."""

    def __init__(self, problem: ShapeProblem, cfg: ReducedConfig | None = None):
        self.problem = problem
        self.cfg = cfg or ReducedConfig()
        if self.cfg.method not in ("newton", "bfgs"):
            raise ValueError(f"unknown reduced-space method {self.cfg.method!r}")
        if self.cfg.newton_preconditioner not in ("within", "across"):
            raise ValueError(f"unknown preconditioner {self.cfg.newton_preconditioner!r}")
        self.bfgs = Bfgs(problem.n)

    def evaluate(self, z, u_guess=None):
        x = self.problem.mesh(z)
        u = self.problem.solve_flow(x, u_guess)
        return x, u, self.problem.objective.value(u, x)

    def newton_direction(self, lin: Linearization):
        """Solve ``H p = -g`` by GMRES; returns ``(p, iterations)``."""
        n = self.problem.n
        within = self.cfg.newton_preconditioner == "within"
        model = Bfgs(n) if within else self.bfgs
        op = lin.hessian_vector
        if within:
            # every Hessian-vector product is an exact curvature pair; FGMRES
            # tolerates the preconditioner changing between iterations
            def op(v):
                hv = lin.hessian_vector(v)
                model.update(v, hv)
                return hv
        res = fgmres(op, -lin.g, model.apply_inverse,
                     KrylovConfig(rel_tol=self.cfg.krylov_rtol, max_iters=4 * n + 10,
                                  restart=4 * n + 10, flexible=within))
        return res.x, res.iters

    def run(self, z0=None, u0=None, callback=None) -> OptimizationResult:
        p, cfg = self.problem, self.cfg
        z = np.zeros(p.n) if z0 is None else np.asarray(z0, dtype=float).copy()
        x, u, _ = self.evaluate(z, u0)
        lin = Linearization(p, z, x, u)
        g0 = np.linalg.norm(lin.g)
        tol = max(cfg.grad_atol, cfg.grad_rtol * g0)
        history = []

        def record(cycle, subits, alpha, note):
            row = make_row(p.ledger, cycle=cycle, grad_norm=float(np.linalg.norm(lin.g)),
                           objective=float(lin.I), subiterations=int(subits), alpha=float(alpha),
                           constraint_norm=0.0, note=note)
            history.append(row)
            if callback is not None:
                callback(row)

        record(0, 0, 0.0, "")
        for cycle in range(1, cfg.max_cycles + 1):
            g = lin.g
            if np.linalg.norm(g) <= tol:
                return OptimizationResult(z, u, True, cycle - 1, history, "converged")
            note = ""
            if cfg.method == "newton":
                d, subits = self.newton_direction(lin)
            else:
                d, subits = -self.bfgs.apply_inverse(g), 0
            slope = float(g @ d)
            if not slope < 0.0:
                note = "non-descent direction; steepest descent used"
                if cfg.method == "bfgs":
                    self.bfgs.reset()
                d, slope = -g, -float(g @ g)

            def trial(alpha):
                zt = z + alpha * d
                xt, ut, It = self.evaluate(zt, u)
                return It, (zt, xt, ut)

            try:
                ls = armijo(trial, lin.I, slope, cfg.c1, 0.5, cfg.max_halvings)
            except LineSearchError as exc:
                record(cycle, subits, 0.0, f"line search failed: {exc.trials[-1]}")
                return OptimizationResult(z, u, False, cycle, history, str(exc))
            z_new, x, u = ls.payload
            new = Linearization(p, z_new, x, u)
            if cfg.method == "bfgs" or cfg.newton_preconditioner == "across":
                self.bfgs.update(z_new - z, new.g - g)
            z, lin = z_new, new
            record(cycle, subits, ls.alpha, note)
        converged = np.linalg.norm(lin.g) <= tol
        return OptimizationResult(z, u, bool(converged), cfg.max_cycles, history,
                                  "converged" if converged else "maximum cycles reached")
