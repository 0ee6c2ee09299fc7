"""Linear-elasticity mesh movement and chained shape sensitivities."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .euler.mesh import DgDiscretization, InvalidMeshError
from .linalg import IlutParams, IlutPreconditioner, KrylovConfig, fgmres

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ElasticityParams:
    lam: float = 1.0
    mu: float = 1.0
    rtol: float = 1e-10
    solver: str = "ilut"  # "ilut" (ILUT-GMRES) or "direct"
    ilut: IlutParams = IlutParams()


def element_stiffness(disc: DgDiscretization, x, lam=1.0, mu=1.0):
    """Per-cell stiffness blocks ordered (node, direction), shape ``(nE, 2 n_g, 2 n_g)``."""
    ref = disc.ref
    xx, xe, yx, ye = disc.jacobians(x)
    det = xx * ye - xe * yx
    if not np.all(det > 0.0):
        e = int(np.unravel_index(np.argmin(det), det.shape)[0])
        raise InvalidMeshError(f"degenerate element {e} (Jacobian {det.min():.3e})")
    Dxi, Deta = ref.dgeo
    gx = (ye[:, :, None] * Dxi[None] - yx[:, :, None] * Deta[None]) / det[:, :, None]
    gy = (-xe[:, :, None] * Dxi[None] + xx[:, :, None] * Deta[None]) / det[:, :, None]
    G = np.stack([gx, gy], axis=-1)  # (e, q, a, i)
    w = det * ref.wq[None, :]
    K = (lam * np.einsum("eq,eqai,eqbj->eaibj", w, G, G)
         + mu * np.einsum("eq,eqaj,eqbi->eaibj", w, G, G)
         + mu * np.einsum("eq,eqak,eqbk,ij->eaibj", w, G, G, np.eye(2)))
    n = 2 * G.shape[2]
    return K.reshape(det.shape[0], n, n)


class ElasticitySystem:
    """Stiffness system ``S dx_vol = M dx_surf`` on the geometry nodes.

    Every boundary node is a Dirichlet node with a unit row, so prescribed
    boundary displacements are reproduced exactly and interior nodes follow
    elastically. The body force is zero.
    """

    def __init__(self, disc: DgDiscretization, params: ElasticityParams | None = None, x_ref=None):
        self.disc = disc
        self.params = params or ElasticityParams()
        self.x_ref = disc.x0 if x_ref is None else np.asarray(x_ref, dtype=float).copy()
        Ke = element_stiffness(disc, self.x_ref, self.params.lam, self.params.mu)
        dofs = disc.cell_geom_dofs()
        rows = np.repeat(dofs, dofs.shape[1], axis=1).ravel()
        cols = np.tile(dofs, (1, dofs.shape[1])).ravel()
        K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(disc.n_geom, disc.n_geom))
        self.stiffness_raw = K
        bn = disc.boundary_nodes()
        self.dirichlet = np.sort(np.concatenate([2 * bn, 2 * bn + 1]))
        mask = np.zeros(disc.n_geom, dtype=bool)
        mask[self.dirichlet] = True
        keep = sp.diags((~mask).astype(float))
        self.S = (keep @ K + sp.diags(mask.astype(float))).tocsr()
        self.S.eliminate_zeros()
        self.M = sp.csr_matrix((np.ones(len(self.dirichlet)), (self.dirichlet, self.dirichlet)),
                               shape=(disc.n_geom, disc.n_geom))
        self._pc = None
        self._lu = None
        self.solves = 0
        self.iterations = 0

    def _solve(self, b):
        self.solves += 1
        if self.params.solver == "direct":
            if self._lu is None:
                self._lu = spla.splu(self.S.tocsc())
            return self._lu.solve(b)
        if self._pc is None:
            self._pc = IlutPreconditioner(self.S, self.params.ilut)
        res = fgmres(self.S.dot, b, self._pc.solve,
                     KrylovConfig(rel_tol=self.params.rtol, max_iters=2000, restart=200, flexible=False))
        if not res.converged:
            raise RuntimeError(f"elasticity solve did not converge ({res.status})")
        self.iterations += res.iters
        return res.x

    def move(self, dx_surf):
        """Volume displacement for a boundary displacement given as a geometry vector."""
        b = self.M @ np.asarray(dx_surf, dtype=float)
        if not np.any(b):
            return np.zeros_like(b)
        dx = self._solve(b)
        dx[self.dirichlet] = b[self.dirichlet]
        return dx

    def deformed(self, dx_surf):
        """Deformed node vector; raises :class:`InvalidMeshError` on folded cells."""
        x = self.x_ref + self.move(dx_surf)
        self.disc.check_valid(x)
        return x


class ChainedSensitivity:
    """Dense ``dx_vol/dz = S^-1 M dx_surf/dz`` computed once with one solve per column."""

    def __init__(self, system: ElasticitySystem, surface_jacobian):
        J = sp.csc_matrix(surface_jacobian)
        cols = [system.move(J[:, j].toarray().ravel()) for j in range(J.shape[1])]
        self.matrix = np.stack(cols, axis=1) if cols else np.zeros((system.disc.n_geom, 0))
        self.matrix.setflags(write=False)
        self.system = system

    @property
    def shape(self):
        return self.matrix.shape

    def dot(self, v):
        return self.matrix @ np.asarray(v, dtype=float)

    def rdot(self, w):
        """Transpose product ``(dx_vol/dz)^T w``."""
        return self.matrix.T @ np.asarray(w, dtype=float)
