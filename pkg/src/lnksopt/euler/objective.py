"""Inverse-design objective: squared state mismatch along the lower wall."""

from __future__ import annotations

import json

import numpy as np
from numpy.polynomial import polynomial as P

from . import jet as J
from .assembly import GroupAssembler, KernelGroup
from .basis import lagrange
from .residual import EulerDG, _normal_map, _state_map


class TargetRangeError(ValueError):
    """Raised when a wall point lies outside the stored target trace."""


class BoundaryTrace:
    """Piecewise-polynomial trace of a flow state along the lower wall.

    Each wall face stores its x-interval and, per conservative component, the
    coefficients of the solution trace as a polynomial in the face coordinate
    ``s in [-1, 1]``, with ``x = xa + (s + 1)(xb - xa)/2``. Evaluation is by
    x-coordinate, so the trace stays well defined when the wall moves vertically.
    """

    def __init__(self, x_edges, coeffs):
        self.x_edges = np.asarray(x_edges, dtype=float)  # (n_faces + 1,)
        self.coeffs = np.asarray(coeffs, dtype=float)  # (n_faces, 4, deg + 1)

    @classmethod
    def from_solution(cls, model: EulerDG, u, x):
        d = model.disc
        ref = d.ref
        cells, f = d.boundary["wall_bottom"]
        X = d.cell_coords(x)[cells]
        ends = lagrange(ref.geo_nodes, np.array([-1.0, 1.0]))[0]
        ends_face = np.einsum("sg,egd->esd", ends, X[:, :ref.q + 1, :])  # bottom node row
        xa, xb = ends_face[:, 0, 0], ends_face[:, 1, 0]
        if not np.allclose(xa[1:], xb[:-1]):
            raise ValueError("wall faces are not contiguous in x")
        s = ref.sol_nodes
        Vb, _ = lagrange(ref.sol_nodes, np.array([-1.0]))  # eta = -1
        U = d.state_view(u)[cells].reshape(len(cells), ref.n1, ref.n1, 4)  # (e, b, a, c)
        trace = np.einsum("b,ebac->eac", Vb[0], U)  # values at xi nodes
        coeffs = np.stack([[P.polyfit(s, trace[e, :, c], ref.p) for c in range(4)]
                           for e in range(len(cells))])
        return cls(np.append(xa, xb[-1]), coeffs)

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        tol = 1e-12 * (1.0 + np.abs(self.x_edges).max())
        if np.any(x < self.x_edges[0] - tol) or np.any(x > self.x_edges[-1] + tol):
            bad = x[(x < self.x_edges[0] - tol) | (x > self.x_edges[-1] + tol)][0]
            raise TargetRangeError(f"x = {bad:.6g} outside target trace "
                                   f"[{self.x_edges[0]:.6g}, {self.x_edges[-1]:.6g}]")
        f = np.clip(np.searchsorted(self.x_edges, x, side="right") - 1, 0, len(self.x_edges) - 2)
        xa, xb = self.x_edges[f], self.x_edges[f + 1]
        return f, 2.0 * (x - xa) / (xb - xa) - 1.0, 2.0 / (xb - xa)

    def taylor(self, x):
        """Values, first and second x-derivatives, each shaped ``(len(x), 4)``."""
        f, s, ds = self._locate(x)
        c = self.coeffs[f]  # (P, 4, deg+1)
        powers = np.arange(c.shape[-1])
        sp_ = s[:, None] ** powers[None, :]
        v = np.einsum("pcd,pd->pc", c, sp_)
        d1c = c[..., 1:] * powers[1:]
        d1 = np.einsum("pcd,pd->pc", d1c, sp_[:, :-1]) * ds[:, None]
        if c.shape[-1] > 2:
            d2c = d1c[..., 1:] * powers[1:-1]
            d2 = np.einsum("pcd,pd->pc", d2c, sp_[:, :-2]) * (ds * ds)[:, None]
        else:
            d2 = np.zeros_like(v)
        return v, d1, d2

    def __call__(self, x):
        return self.taylor(np.atleast_1d(x))[0]

    def to_json(self):
        return json.dumps({"x_edges": self.x_edges.tolist(), "coeffs": self.coeffs.tolist()})

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(data["x_edges"], data["coeffs"])


class WallObjective:
    """``I(u, x) = int_wall sum_c (u_c - u_c^t(x))^2 ds`` with exact derivatives."""

    def __init__(self, model: EulerDG, target: BoundaryTrace):
        self.model = model
        self.target = target
        d = model.disc
        ref = d.ref
        cells, f = d.boundary["wall_bottom"]
        Au = _state_map(ref.face_phi[f], d.n_p, k=7)
        Ax = _normal_map(*ref.face_dgeo[f], ref.NORMALS[f], 4, 7)
        Ax[:, 6, 0::2] = ref.face_geo[f]
        T = ref.wf[:, None, None].copy()
        udofs = d.cell_state_dofs()[cells]
        xdofs = d.cell_geom_dofs()[cells]
        ridx = np.zeros((len(cells), 1), dtype=np.int64)
        self.group = KernelGroup("objective", self._kernel, Au, Ax, T, udofs, xdofs, ridx,
                                 aux=lambda vals: self.target.taylor(vals[..., 6].ravel()))
        self.assembler = GroupAssembler([self.group], 1, d.n_state, d.n_geom)
        self._one = np.ones(1)

    @staticmethod
    def _kernel(inp, aux):
        t0, t1, t2 = aux
        u, N, xq = inp[0:4], inp[4:6], inp[6]
        area = J.sqrt(N[0] * N[0] + N[1] * N[1])
        total = 0.0
        for c in range(4):
            if isinstance(xq, J.Jet):
                ut = xq.unary(t0[:, c], t1[:, c], t2[:, c])
            else:
                ut = t0[:, c]
            diff = u[c] - ut
            total = diff * diff + total
        return [area * total]

    def value(self, u, x):
        return float(self.group.local_residual(np.asarray(u, float), np.asarray(x, float)).sum())

    def gradients(self, u, x):
        """Return ``(I, I_u, I_x)``."""
        loc = self.group.local_first(np.asarray(u, float), np.asarray(x, float))
        return (float(loc["res"].sum()), self.assembler.vector_on("u", [loc["u"][:, 0, :]]),
                self.assembler.vector_on("x", [loc["x"][:, 0, :]]))

    def derivatives(self, u, x, blocks=("uu", "ux", "xx")):
        """Value, gradients and Hessian blocks (CSR) in one pass."""
        loc = self.group.local_second(np.asarray(u, float), np.asarray(x, float), self._one, blocks)
        out = {"I": float(loc["res"].sum()),
               "u": self.assembler.vector_on("u", [loc["u"][:, 0, :]]),
               "x": self.assembler.vector_on("x", [loc["x"][:, 0, :]])}
        for b in blocks:
            out[b] = self.assembler.matrix(b, [loc[b]])
        return out
