"""Structured curved quadrilateral meshes for the bump channel."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import ReferenceElement, gauss_lobatto

BOUNDARY_TAGS = ("inlet", "outlet", "wall_bottom", "wall_top")


class InvalidMeshError(ValueError):
    """Raised when a metric Jacobian determinant is not positive."""


def bump_height(x, h):
    return h * np.exp(-25.0 * x ** 2)


@dataclass
class DgDiscretization:
    """Mesh connectivity, reference element and degree-of-freedom layout.

    Geometry nodes form a continuous ``(nx*q+1) x (ny*q+1)`` grid; node ``k``
    has coordinates ``x[2k], x[2k+1]`` in the flat node vector. The state
    vector is ordered cell, solution node, conservative component.
    """

    p: int
    nx: int
    ny: int
    nodes: np.ndarray
    ref: ReferenceElement
    cell_nodes: np.ndarray = field(init=False)
    interior: dict = field(init=False)
    boundary: dict = field(init=False)

    n_state_vars = 4

    def __post_init__(self):
        p, nx, ny = self.ref.q, self.nx, self.ny
        NX = nx * p + 1
        a = np.arange(p + 1)
        loc = (a[None, :] + NX * a[:, None]).ravel()  # local a + (p+1) b
        # cells are numbered column by column from inlet to outlet; this
        # streamwise ordering keeps incomplete factorizations stable
        cells = []
        for i in range(nx):
            for j in range(ny):
                cells.append(i * p + NX * j * p + loc)
        self.cell_nodes = np.array(cells, dtype=np.int64)

        cid = np.arange(nx * ny).reshape(nx, ny).T
        # interior faces grouped by orientation: (owner face, neighbour face)
        self.interior = {
            (1, 0): (cid[:, :-1].ravel(), cid[:, 1:].ravel()),
            (3, 2): (cid[:-1, :].ravel(), cid[1:, :].ravel()),
        }
        self.boundary = {
            "inlet": (cid[:, 0].copy(), 0),
            "outlet": (cid[:, -1].copy(), 1),
            "wall_bottom": (cid[0, :].copy(), 2),
            "wall_top": (cid[-1, :].copy(), 3),
        }

    # -- sizes --------------------------------------------------------------
    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def q(self):
        """Geometry degree."""
        return self.ref.q

    @property
    def n_p(self):
        return (self.p + 1) ** 2

    @property
    def n_state(self):
        return self.n_cells * self.n_p * 4

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_geom(self):
        return 2 * self.n_nodes

    @property
    def x0(self):
        return self.nodes.ravel().copy()

    def cell_state_dofs(self):
        """Global state indices per cell, shape ``(n_cells, 4 n_p)``."""
        blk = 4 * self.n_p
        return np.arange(self.n_cells)[:, None] * blk + np.arange(blk)[None, :]

    def cell_geom_dofs(self):
        """Global geometry indices per cell ordered (node, direction)."""
        cn = self.cell_nodes
        return (2 * cn[:, :, None] + np.arange(2)[None, None, :]).reshape(cn.shape[0], -1)

    def boundary_nodes(self, tag=None):
        """Indices of geometry nodes on one tagged boundary (or on all)."""
        NX, NY = self.nx * self.q + 1, self.ny * self.q + 1
        grid = np.arange(NX * NY).reshape(NY, NX)
        sides = {"inlet": grid[:, 0], "outlet": grid[:, -1],
                 "wall_bottom": grid[0, :], "wall_top": grid[-1, :]}
        if tag is not None:
            return sides[tag].copy()
        return np.unique(np.concatenate(list(sides.values())))

    def state_view(self, u):
        return np.asarray(u).reshape(self.n_cells, self.n_p, 4)

    # -- geometry -----------------------------------------------------------
    def cell_coords(self, x):
        """Node coordinates per cell, shape ``(n_cells, n_g, 2)``."""
        return np.asarray(x).reshape(-1, 2)[self.cell_nodes]

    def jacobians(self, x):
        """``(x_xi, x_eta, y_xi, y_eta)`` at volume quadrature points."""
        X = self.cell_coords(x)
        Dxi, Deta = self.ref.dgeo
        a = np.einsum("qg,egd->eqd", Dxi, X)
        b = np.einsum("qg,egd->eqd", Deta, X)
        return a[..., 0], b[..., 0], a[..., 1], b[..., 1]

    def det_jacobian(self, x):
        xx, xe, yx, ye = self.jacobians(x)
        return xx * ye - xe * yx

    def check_valid(self, x):
        det = self.det_jacobian(x)
        if not np.all(det > 0.0):
            e, q = np.unravel_index(np.argmin(det), det.shape)
            raise InvalidMeshError(f"non-positive Jacobian {det[e, q]:.3e} in cell {e} at point {q}")
        return det

    def quadrature_points(self, x):
        X = self.cell_coords(x)
        return np.einsum("qg,egd->eqd", self.ref.geo, X)


def bump_mesh(nx, ny, p, h=0.0625, n_quad=None, geometry_degree=None, mapping="decay",
              x_range=(-1.5, 1.5), height=0.8):
    """Channel mesh over ``x_range`` with a Gaussian bump on the lower wall.

    Nodes are uniform in x. With ``mapping="blend"`` they are spread linearly
    between the wall ``y = h exp(-25 x^2)`` and the top ``y = height``; with
    ``mapping="decay"`` a uniform grid is lifted by ``h exp(-25 x^2) exp(-30 y^2)``
    so the perturbation fades away from the wall.
    """
    if p < 1:
        raise ValueError("degree must be at least 1")
    q = p if geometry_degree is None else geometry_degree
    gl = (gauss_lobatto(q + 1)[0] + 1.0) / 2.0

    def axis(n):
        s = (np.arange(n)[:, None] + gl[None, :-1]).ravel() / n
        return np.append(s, 1.0)

    sx = axis(nx)
    sy = axis(ny)
    x = x_range[0] + (x_range[1] - x_range[0]) * sx
    yw = bump_height(x, h)
    X = np.broadcast_to(x[None, :], (len(sy), len(x)))
    if mapping == "blend":
        Y = yw[None, :] + sy[:, None] * (height - yw[None, :])
    elif mapping == "decay":
        y0 = height * sy[:, None]
        Y = y0 + yw[None, :] * np.exp(-30.0 * y0 ** 2)
    else:
        raise ValueError(f"unknown mapping {mapping!r}")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    return DgDiscretization(p, nx, ny, nodes, ReferenceElement(p, n_quad, q))
