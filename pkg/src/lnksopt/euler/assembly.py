"""Element-kernel evaluation with exact first and second derivatives.

Each :class:`KernelGroup` describes a batch of identical elements (cells or
faces of one orientation). At every quadrature point the kernel inputs are
linear in the element's state and geometry unknowns through constant maps
``Au`` and ``Ax``, and the element residual is a constant linear combination
``T`` of the kernel outputs. Derivatives of the pointwise kernel come from
:class:`~lnksopt.euler.jet.Jet` and are pulled back through those maps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..linalg.csr import PatternAssembler
from .jet import Jet, stack_derivatives


@dataclass
class KernelGroup:
    name: str
    kernel: Callable  # kernel(inputs, aux) -> list of outputs
    Au: np.ndarray  # (nq, k, n_u_loc)
    Ax: np.ndarray  # (nq, k, n_x_loc)
    T: np.ndarray  # (nq, n_res_loc, m)
    u_idx: np.ndarray  # (nE, n_u_loc)
    x_idx: np.ndarray  # (nE, n_x_loc)
    r_idx: np.ndarray  # (nE, n_res_loc)
    aux: Optional[Callable] = None  # aux(values (nE, nq, k)) -> per-point data

    @property
    def n_elem(self):
        return self.u_idx.shape[0]

    @property
    def nq(self):
        return self.Au.shape[0]

    @property
    def k(self):
        return self.Au.shape[1]

    def inputs(self, u, x):
        """Kernel input values, shape ``(nE, nq, k)``."""
        return (np.einsum("qkl,el->eqk", self.Au, u[self.u_idx], optimize=True)
                + np.einsum("qkl,el->eqk", self.Ax, x[self.x_idx], optimize=True))

    def _run(self, vals, order):
        nE, nq, k = vals.shape
        flat = vals.reshape(nE * nq, k)
        aux = self.aux(vals) if self.aux is not None else None
        if order == 0:
            out = self.kernel([flat[:, a] for a in range(k)], aux)
            return np.stack(out, axis=1).reshape(nE, nq, -1), None, None
        seeds = Jet.seed(flat, order=order)
        out = self.kernel(seeds, aux)
        v, g, h = stack_derivatives(out)
        m = v.shape[1]
        g = g.reshape(nE, nq, m, k)
        if h is not None:
            h = h.reshape(nE, nq, m, k, k)
        return v.reshape(nE, nq, m), g, h

    def local_residual(self, u, x):
        F, _, _ = self._run(self.inputs(u, x), 0)
        return np.einsum("qrm,eqm->er", self.T, F, optimize=True)

    def local_first(self, u, x, wrt=("u", "x")):
        """Element residuals and Jacobians with respect to state and/or geometry."""
        F, G, _ = self._run(self.inputs(u, x), 1)
        res = np.einsum("qrm,eqm->er", self.T, F, optimize=True)
        out = {"res": res}
        if "u" in wrt:
            out["u"] = np.einsum("qrm,eqmk,qkl->erl", self.T, G, self.Au, optimize=True)
        if "x" in wrt:
            out["x"] = np.einsum("qrm,eqmk,qkl->erl", self.T, G, self.Ax, optimize=True)
        return out

    def local_second(self, u, x, lam, blocks=("uu", "ux", "xx")):
        """Element blocks of ``sum_r lam_r d^2 R_r`` (plus residual and Jacobians)."""
        F, G, H = self._run(self.inputs(u, x), 2)
        W = np.einsum("qrm,er->eqm", self.T, lam[self.r_idx], optimize=True)
        Hc = np.einsum("eqm,eqmab->eqab", W, H, optimize=True)
        maps = {"u": self.Au, "x": self.Ax}
        out = {"res": np.einsum("qrm,eqm->er", self.T, F, optimize=True)}
        out["u"] = np.einsum("qrm,eqmk,qkl->erl", self.T, G, self.Au, optimize=True)
        out["x"] = np.einsum("qrm,eqmk,qkl->erl", self.T, G, self.Ax, optimize=True)
        for blk in blocks:
            A, B = maps[blk[0]], maps[blk[1]]
            out[blk] = np.einsum("qal,eqab,qbj->elj", A, Hc, B, optimize=True)
        return out


class GroupAssembler:
    """Scatter element contributions of several groups into global objects."""

    def __init__(self, groups, n_res, n_u, n_x):
        self.groups = list(groups)
        self.n_res = n_res
        self.sizes = {"u": n_u, "x": n_x}
        self._pat = {}

    def _index(self, g, var):
        return g.u_idx if var == "u" else g.x_idx if var == "x" else g.r_idx

    def pattern(self, kind):
        """Sparsity pattern assembler for ``kind`` in {u, x, uu, ux, xu, xx}."""
        if kind not in self._pat:
            rows, cols = [], []
            if len(kind) == 1:
                shape = (self.n_res, self.sizes[kind])
                for g in self.groups:
                    ri, ci = g.r_idx, self._index(g, kind)
                    rows.append(np.broadcast_to(ri[:, :, None], ri.shape + (ci.shape[1],)).ravel())
                    cols.append(np.broadcast_to(ci[:, None, :], (ci.shape[0], ri.shape[1], ci.shape[1])).ravel())
            else:
                shape = (self.sizes[kind[0]], self.sizes[kind[1]])
                for g in self.groups:
                    ri, ci = self._index(g, kind[0]), self._index(g, kind[1])
                    rows.append(np.broadcast_to(ri[:, :, None], ri.shape + (ci.shape[1],)).ravel())
                    cols.append(np.broadcast_to(ci[:, None, :], (ci.shape[0], ri.shape[1], ci.shape[1])).ravel())
            self._pat[kind] = PatternAssembler(np.concatenate(rows), np.concatenate(cols), shape)
        return self._pat[kind]

    def vector(self, locals_):
        idx = np.concatenate([g.r_idx.ravel() for g in self.groups])
        vals = np.concatenate([l.ravel() for l in locals_])
        return np.bincount(idx, weights=vals, minlength=self.n_res)

    def vector_on(self, var, locals_):
        idx = np.concatenate([self._index(g, var).ravel() for g in self.groups])
        vals = np.concatenate([l.ravel() for l in locals_])
        return np.bincount(idx, weights=vals, minlength=self.sizes[var])

    def matrix(self, kind, locals_):
        return self.pattern(kind).assemble(np.concatenate([l.ravel() for l in locals_]))
