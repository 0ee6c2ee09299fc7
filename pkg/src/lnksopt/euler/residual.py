"""Weak-form DG residual of the 2D Euler equations and its derivatives.

The residual of cell ``K`` for test function ``phi_i`` is

    R_i = sum_faces int phi_i F*(u-, u+, N) ds  -  int grad(phi_i) . f(u) dx

evaluated on the reference element: the volume term uses the contravariant
flux ``adj(J) f`` and face terms use the scaled normal ``N = adj(J)^T n_ref``
of the owner cell, both of which are linear in the node coordinates.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .assembly import GroupAssembler, KernelGroup
from .basis import gauss_legendre, lagrange, tensor
from .flux import inlet_state, outlet_state, roe_flux, wall_state
from .gas import FlowBoundaryConditions, FreeStream, NonPhysicalStateError, euler_flux, pressure
from .mesh import DgDiscretization


def _state_map(table, n_p, offset=0, n_cols=None, first_input=0, k=None):
    """Map from element state dofs to four interpolated components."""
    nq = table.shape[0]
    n_cols = 4 * n_p if n_cols is None else n_cols
    A = np.zeros((nq, k, n_cols))
    for c in range(4):
        A[:, first_input + c, offset + c: offset + 4 * n_p: 4] = table
    return A


def _normal_map(dxi, deta, n_ref, first_input, k):
    """Map from element node coordinates to the scaled face normal."""
    nq, n_g = dxi.shape
    A = np.zeros((nq, k, 2 * n_g))
    n0, n1 = n_ref
    A[:, first_input, 1::2] = deta * n0 - dxi * n1
    A[:, first_input + 1, 0::2] = -deta * n0 + dxi * n1
    return A


def volume_kernel(inp, aux=None):
    u = inp[0:4]
    xx, xe, yx, ye = inp[4:8]
    fx, fy = euler_flux(u)
    fxi = [ye * fx[c] - xe * fy[c] for c in range(4)]
    feta = [-yx * fx[c] + xx * fy[c] for c in range(4)]
    return fxi + feta


def interior_kernel(inp, aux=None):
    return roe_flux(inp[0:4], inp[4:8], inp[8:10])


class EulerDG:
    """Residual, Jacobians and dual-weighted Hessians on a DG discretization."""

    def __init__(self, disc: DgDiscretization, bc: FlowBoundaryConditions | None = None,
                 freestream: FreeStream | None = None, wall="mirror"):
        if wall not in ("mirror", "pressure"):
            raise ValueError(f"unknown wall treatment {wall!r}")
        self.wall = wall
        self.disc = disc
        self.fs = freestream or FreeStream()
        self.bc = bc or FlowBoundaryConditions.from_freestream(self.fs)
        self.groups = self._build_groups()
        self.assembler = GroupAssembler(self.groups, disc.n_state, disc.n_state, disc.n_geom)
        self._mass_pattern = None
        self.ledger = None  # optional CostLedger charged per evaluation

    def _charge(self, *events):
        if self.ledger is not None:
            for e in events:
                self.ledger.charge(e)

    # -- construction -------------------------------------------------------
    def _build_groups(self):
        d = self.disc
        ref = d.ref
        n_p, n_g = d.n_p, ref.geo.shape[1]
        udofs = d.cell_state_dofs()
        xdofs = d.cell_geom_dofs()
        groups = []

        nq = ref.phi.shape[0]
        Au = _state_map(ref.phi, n_p, k=8)
        Ax = np.zeros((nq, 8, 2 * n_g))
        Dxi, Deta = ref.dgeo
        Ax[:, 4, 0::2] = Dxi
        Ax[:, 5, 0::2] = Deta
        Ax[:, 6, 1::2] = Dxi
        Ax[:, 7, 1::2] = Deta
        T = np.zeros((nq, 4 * n_p, 8))
        for c in range(4):
            T[:, c::4, c] = -(ref.wq[:, None] * ref.dphi[0])
            T[:, c::4, 4 + c] = -(ref.wq[:, None] * ref.dphi[1])
        groups.append(KernelGroup("volume", volume_kernel, Au, Ax, T, udofs, xdofs, udofs))

        wf = ref.wf
        for (fo, fn), (own, nbr) in d.interior.items():
            nqf = ref.face_phi[fo].shape[0]
            Au = _state_map(ref.face_phi[fo], n_p, 0, 8 * n_p, 0, 10)
            Au += _state_map(ref.face_phi[fn], n_p, 4 * n_p, 8 * n_p, 4, 10)
            Ax = _normal_map(*ref.face_dgeo[fo], ref.NORMALS[fo], 8, 10)
            T = np.zeros((nqf, 8 * n_p, 4))
            for c in range(4):
                T[:, c:4 * n_p:4, c] = wf[:, None] * ref.face_phi[fo]
                T[:, 4 * n_p + c::4, c] = -wf[:, None] * ref.face_phi[fn]
            uidx = np.concatenate([udofs[own], udofs[nbr]], axis=1)
            groups.append(KernelGroup(f"interior{fo}{fn}", interior_kernel, Au, Ax, T,
                                      uidx, xdofs[own], uidx))

        for tag, (cells, f) in d.boundary.items():
            nqf = ref.face_phi[f].shape[0]
            Au = _state_map(ref.face_phi[f], n_p, k=6)
            Ax = _normal_map(*ref.face_dgeo[f], ref.NORMALS[f], 4, 6)
            T = np.zeros((nqf, 4 * n_p, 4))
            for c in range(4):
                T[:, c::4, c] = wf[:, None] * ref.face_phi[f]
            groups.append(KernelGroup(tag, self._boundary_kernel(tag), Au, Ax, T,
                                      udofs[cells], xdofs[cells], udofs[cells]))
        return groups

    def _boundary_kernel(self, tag):
        bc = self.bc

        def kernel(inp, aux=None):
            u, N = inp[0:4], inp[4:6]
            if tag == "inlet":
                ub = inlet_state(u, N, bc)
            elif tag == "outlet":
                ub = outlet_state(u, N, bc)
            elif self.wall == "pressure":
                p = pressure(u, bc.gamma)
                zero = 0.0 * p
                return [zero, p * N[0], p * N[1], zero]
            else:
                ub = wall_state(u, N, bc.gamma)
            return roe_flux(u, ub, N, bc.gamma)

        return kernel

    # -- state checks -------------------------------------------------------
    def check_state(self, u, x=None):
        """Raise :class:`NonPhysicalStateError` naming the first bad cell/point."""
        uq = np.einsum("qi,eic->eqc", self.disc.ref.phi, self.disc.state_view(u))
        p = pressure([uq[..., c] for c in range(4)], self.fs.gamma)
        bad = (uq[..., 0] <= 0.0) | (p <= 0.0) | ~np.isfinite(p)
        if np.any(bad):
            e, q = np.argwhere(bad)[0]
            raise NonPhysicalStateError(
                f"non-physical state in cell {e} at quadrature point {q}: "
                f"rho={uq[e, q, 0]:.3e}, p={p[e, q]:.3e}")

    # -- residual and derivatives ------------------------------------------
    def residual(self, u, x):
        u = np.asarray(u, dtype=float)
        x = np.asarray(x, dtype=float)
        self.check_state(u)
        self._charge("residual")
        return self.assembler.vector([g.local_residual(u, x) for g in self.groups])

    def jacobians(self, u, x, wrt=("u", "x")):
        """Return ``(R, {"u": R_u, "x": R_x})`` as CSR matrices."""
        u = np.asarray(u, dtype=float)
        x = np.asarray(x, dtype=float)
        self.check_state(u)
        loc = [g.local_first(u, x, wrt) for g in self.groups]
        self._charge(*(f"assemble_R_{w}" for w in wrt))
        R = self.assembler.vector([l["res"] for l in loc])
        mats = {w: self.assembler.matrix(w, [l[w] for l in loc]) for w in wrt}
        return R, mats

    def residual_derivatives(self, u, x, lam, blocks=("uu", "ux", "xx")):
        """``R``, ``R_u``, ``R_x`` and the dual-weighted second derivatives.

        Keys of the returned dict: ``R``, ``u``, ``x`` and each name in
        ``blocks`` (``uu``, ``ux``, ``xu``, ``xx``), all matrices in CSR form.
        """
        u = np.asarray(u, dtype=float)
        x = np.asarray(x, dtype=float)
        lam = np.asarray(lam, dtype=float)
        self.check_state(u)
        loc = [g.local_second(u, x, lam, blocks) for g in self.groups]
        self._charge("assemble_R_u", "assemble_R_x",
                     *(f"assemble_R_{b}" for b in blocks if b != "xu"))
        out = {"R": self.assembler.vector([l["res"] for l in loc])}
        for w in ("u", "x") + tuple(blocks):
            out[w] = self.assembler.matrix(w, [l[w] for l in loc])
        return out

    # -- mass matrix and functionals ----------------------------------------
    def cell_mass(self, x):
        """Scalar mass matrices per cell, shape ``(n_cells, n_p, n_p)``."""
        ref = self.disc.ref
        det = self.disc.check_valid(x)
        return np.einsum("q,eq,qi,qj->eij", ref.wq, det, ref.phi, ref.phi, optimize=True)

    def mass_matrix(self, x):
        """Block-diagonal DG mass matrix on the full state vector."""
        Mc = self.cell_mass(x)
        blocks = np.einsum("eij,cd->eicjd", Mc, np.eye(4)).reshape(self.disc.n_cells, 4 * self.disc.n_p, -1)
        return sp.block_diag(list(blocks), format="csr")

    def entropy_error(self, u, x, extra_points=10):
        """L2 norm of ``p/p_inf (rho_inf/rho)^gamma - 1`` over the domain.

        The integral uses a Gauss rule with ``extra_points`` more points per
        direction than the residual quadrature, so superconvergence at the
        residual's quadrature points does not hide the true L2 error.
        """
        ref = self.disc.ref
        nq = ref.nq1 + extra_points
        xq, wq = gauss_legendre(nq)
        Vs, _ = lagrange(ref.sol_nodes, xq)
        Vg, Dg = lagrange(ref.geo_nodes, xq)
        phi = tensor(Vs, Vs)
        Dxi, Deta = tensor(Dg, Vg), tensor(Vg, Dg)
        X = self.disc.cell_coords(x)
        a = np.einsum("qg,egd->eqd", Dxi, X)
        b = np.einsum("qg,egd->eqd", Deta, X)
        det = a[..., 0] * b[..., 1] - b[..., 0] * a[..., 1]
        uq = np.einsum("qi,eic->eqc", phi, self.disc.state_view(u))
        r = uq[..., 0]
        p = pressure([uq[..., c] for c in range(4)], self.fs.gamma)
        s = p / self.fs.p * (self.fs.rho / r) ** self.fs.gamma - 1.0
        return float(np.sqrt(np.einsum("q,eq,eq->", np.outer(wq, wq).ravel(), det, s * s)))

    def freestream_state(self):
        return np.tile(self.fs.conservative(), self.disc.n_cells * self.disc.n_p)
