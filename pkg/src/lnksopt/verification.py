"""Self-check suites run by ``lnks-bench verify``: cost tables, preconditioners, gradients, flux."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cost_model
from .euler.flux import roe_flux_array
from .euler.gas import FreeStream, normal_flux
from .kkt_lab import run_lab

SUITES = ("precond", "gradients", "cost-tables", "flux")


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.3e} (tol {self.tol:.1e})"


def _check(name, value, tol):
    value = float(value)
    return Check(name, value, tol, bool(np.isfinite(value) and value <= tol))


# Published cost-table cells, indexed by (p, d).
PUBLISHED = {
    "residual": {(1, 2): (692, 710, 2112), (2, 2): (2997, 1545, 6087), (3, 2): (8912, 2956, 14824),
                 (4, 2): (21125, 5135, 31395), (1, 3): (4680, 2732, 12876), (2, 3): (45549, 14355, 88614),
                 (3, 3): (245312, 53936, 407120), (4, 3): (921375, 157475, 1393800)},
    "vmult-ru": {(1, 2): (2560, 1.2), (2, 2): (12960, 2.1), (3, 2): (40960, 2.8), (4, 2): (100000, 3.2),
                 (1, 3): (22400, 1.7), (2, 3): (255150, 2.9), (3, 3): (1433600, 3.5), (4, 3): (5468750, 3.9)},
    "vmult-rx": {(1, 2): (256, 0.12), (2, 2): (1296, 0.21), (3, 2): (4096, 0.28), (4, 2): (10000, 0.32),
                 (1, 3): (1920, 0.15), (2, 3): (21870, 0.25), (3, 3): (122880, 0.30), (4, 3): (468750, 0.34)},
    "vmult-rxx": {(1, 2): (128, 0.06), (2, 2): (648, 0.11), (3, 2): (2048, 0.14), (4, 2): (5000, 0.16),
                  (1, 3): (1152, 0.09), (2, 3): (13122, 0.15), (3, 3): (73728, 0.18), (4, 3): (281250, 0.20)},
    "assembly-ru": {(1, 2): (28.0,), (2, 2): (55.5,), (3, 2): (90.8,), (4, 2): (134.0,),
                    (1, 3): (66.7,), (2, 3): (201.9,), (3, 3): (448.4,), (4, 3): (838.1,)},
    "assembly-rx": {(1, 2): (9.2,), (2, 2): (19.2,), (3, 2): (33.2,), (4, 2): (51.2,),
                    (1, 3): (25.2,), (2, 3): (82.2,), (3, 3): (193.2,), (4, 3): (376.2,)},
    "assembly-uu": {(1, 2): (98.0,), (2, 2): (194.3,), (3, 2): (317.7,), (4, 2): (468.9,),
                    (1, 3): (233.5,), (2, 3): (706.5,), (3, 3): (1569.5,), (4, 3): (2933.3,)},
    "assembly-ux": {(1, 2): (32.4,), (2, 2): (67.4,), (3, 2): (116.4,), (4, 2): (179.4,),
                    (1, 3): (88.4,), (2, 3): (287.9,), (3, 3): (676.4,), (4, 3): (1316.9,)},
    "breakeven-rx": {(1, 2): (2,), (2, 2): (4,), (3, 2): (8,), (4, 2): (12,),
                     (1, 3): (6,), (2, 3): (19,), (3, 3): (45,), (4, 3): (88,)},
    "breakeven-uu": {(1, 2): (13,), (2, 2): (27,), (3, 2): (46,), (4, 2): (69,),
                     (1, 3): (32,), (2, 3): (102,), (3, 3): (234,), (4, 3): (447,)},
    "breakeven-ux": {(1, 2): (2,), (2, 2): (4,), (3, 2): (7,), (4, 2): (12,),
                     (1, 3): (6,), (2, 3): (18,), (3, 3): (44,), (4, 3): (85,)},
    "breakeven-xx": {(1, 2): (4,), (2, 2): (9,), (3, 2): (15,), (4, 2): (23,),
                     (1, 3): (11,), (2, 3): (37,), (3, 3): (87,), (4, 3): (169,)},
}


def cost_table_suite():
    checks = []
    for name, cells in PUBLISHED.items():
        worst = 0.0
        for (p, d), expected in cells.items():
            got = cost_model.table_row(name, p, d)
            for e, g in zip(expected, got):
                worst = max(worst, abs(float(e) - float(g)))
        # integers must match exactly; one/two-decimal cells to their last digit
        checks.append(_check(f"table {name}", worst, 0.0))
    consts = cost_model.matrix_free_constants()
    checks.append(_check("AD constants 2.25/3.5/7.875",
                         max(abs(a - b) for a, b in zip(consts.values(), (2.25, 3.5, 7.875))), 0.0))
    return checks


def precond_suite(seeds=50):
    reports = run_lab(seeds=range(seeds))
    worst = lambda key: max(r[key] for r in reports)
    return [
        _check(f"P4^-1 K template ({len(reports)} problems)", worst("p4_template"), 1e-9),
        _check("P2^-1 K template", worst("p2_template"), 1e-9),
        _check("P4 spectrum", worst("p4_spectrum"), 1e-7),
        _check("P2 spectrum", worst("p2_spectrum"), 1e-7),
        _check("block inverses", max(max(r["inverses"].values()) for r in reports), 1e-9),
        _check("P4 4-solve application", max(r["algorithmic"]["P4"] for r in reports), 1e-10),
        _check("P2 2-solve application", max(r["algorithmic"]["P2"] for r in reports), 1e-10),
    ]


def flux_suite(n_states=200, seed=0):
    rng = np.random.default_rng(seed)
    fs = FreeStream()

    def states(k):
        rho = rng.uniform(0.5, 1.5, k)
        v = rng.uniform(-0.5, 0.5, (k, 2))
        p = rng.uniform(0.4, 1.2, k)
        E = p / (fs.gamma - 1.0) + 0.5 * rho * (v * v).sum(1)
        return np.column_stack([rho, rho * v[:, 0], rho * v[:, 1], E])

    uL, uR = states(n_states), states(n_states)
    n = rng.standard_normal((n_states, 2))
    exact = np.stack(normal_flux(list(uL.T), list(n.T)), axis=1)
    checks = [
        _check("consistency F(u,u,n) = f(u).n", np.abs(roe_flux_array(uL, uL, n) - exact).max(), 1e-12),
        _check("conservation F(a,b,n) = -F(b,a,-n)",
               np.abs(roe_flux_array(uL, uR, n) + roe_flux_array(uR, uL, -n)).max(), 1e-12),
        _check("homogeneity F(a,b,2n) = 2F(a,b,n)",
               np.abs(roe_flux_array(uL, uR, 2 * n) - 2 * roe_flux_array(uL, uR, n)).max(), 1e-12),
    ]
    from .euler.mesh import bump_mesh
    from .euler.residual import EulerDG

    model = EulerDG(bump_mesh(8, 2, 2, h=0.0))
    checks.append(_check("free stream preserved on flat channel",
                         np.abs(model.residual(model.freestream_state(), model.disc.x0)).max(), 1e-12))
    return checks


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def gradient_suite(points=3, seed=0, cfg=None):
    """Finite-difference checks of the residual derivatives, reduced gradient and Hessian."""
    from .problem import BumpConfig, ShapeProblem
    from .reduced import Linearization

    # tight flow convergence keeps solver noise in the differenced objective
    # well below the O(h^2) truncation error
    cfg = cfg or BumpConfig(nx=16, ny=4, n_design=6, flow_tol=1e-13)
    prob = ShapeProblem(cfg)
    model = prob.model
    rng = np.random.default_rng(seed)
    worst = {k: 0.0 for k in ("R_u", "R_x", "R_uu", "R_ux", "R_xx", "gradient", "hessian")}
    for _ in range(points):
        z = 2e-3 * rng.standard_normal(prob.n)
        x = prob.mesh(z)
        u = prob.solve_flow(x)
        lin = Linearization(prob, z, x, u)
        # residual-derivative operators at a perturbed state
        uu = u + 1e-3 * rng.standard_normal(u.size)
        lam = rng.standard_normal(u.size)
        D = model.residual_derivatives(uu, x, lam, ("uu", "ux", "xx"))
        du = rng.standard_normal(u.size)
        dx = 1e-2 * rng.standard_normal(x.size)
        e = 1e-6

        def cd(f, a, b):
            return (f(a) - f(b)) / (2 * e)

        J = lambda uv, xv: model.jacobians(uv, xv, ("u", "x"))[1]
        worst["R_u"] = max(worst["R_u"], _rel(D["u"] @ du, cd(lambda t: model.residual(t, x), uu + e * du, uu - e * du)))
        worst["R_x"] = max(worst["R_x"], _rel(D["x"] @ dx, cd(lambda t: model.residual(uu, t), x + e * dx, x - e * dx)))
        worst["R_uu"] = max(worst["R_uu"], _rel(D["uu"] @ du, cd(lambda t: J(t, x)["u"].T @ lam, uu + e * du, uu - e * du)))
        worst["R_ux"] = max(worst["R_ux"], _rel(D["ux"] @ dx, cd(lambda t: J(uu, t)["u"].T @ lam, x + e * dx, x - e * dx)))
        worst["R_xx"] = max(worst["R_xx"], _rel(D["xx"] @ dx, cd(lambda t: J(uu, t)["x"].T @ lam, x + e * dx, x - e * dx)))
        # reduced gradient against the objective through full flow re-solves
        h = 1e-4
        fd = np.empty(prob.n)
        for j in range(prob.n):
            vals = []
            for s in (h, -h):
                zj = z.copy()
                zj[j] += s
                xj = prob.mesh(zj)
                vals.append(prob.objective.value(prob.solve_flow(xj, u), xj))
            fd[j] = (vals[0] - vals[1]) / (2 * h)
        worst["gradient"] = max(worst["gradient"], _rel(lin.g, fd))
        # Hessian-vector product against differences of the reduced gradient
        v = rng.standard_normal(prob.n)
        gs = []
        for s in (h, -h):
            zs = z + s * v
            xs = prob.mesh(zs)
            gs.append(Linearization(prob, zs, xs, prob.solve_flow(xs, u)).g)
        worst["hessian"] = max(worst["hessian"], _rel(lin.hessian_vector(v), (gs[0] - gs[1]) / (2 * h)))
    tol = {"gradient": 1e-5, "hessian": 1e-4}
    return [_check(f"{k} vs finite differences ({points} points)", w, tol.get(k, 1e-5))
            for k, w in worst.items()]


def run_suite(name, **kwargs):
    if name == "cost-tables":
        return cost_table_suite()
    if name == "precond":
        return precond_suite(**kwargs)
    if name == "gradients":
        return gradient_suite(**kwargs)
    if name == "flux":
        return flux_suite(**kwargs)
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
