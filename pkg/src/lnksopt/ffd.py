"""Free-form deformation of the lower wall with a Bernstein control lattice."""

from __future__ import annotations

import json

import numpy as np
import scipy.sparse as sp
from scipy.special import comb


class FfdEmbeddingError(ValueError):
    """Raised when a point lies outside the deformation box."""


def bernstein(n, t):
    """All degree-``n`` Bernstein polynomials at ``t``, shape ``(len(t), n+1)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    i = np.arange(n + 1)
    return comb(n, i)[None, :] * t[:, None] ** i[None, :] * (1.0 - t[:, None]) ** (n - i)[None, :]


class FfdBox:
    """Two-dimensional parallelogram lattice of ``(n_s+1) x (n_t+1)`` control points.

    The box is ``Q + s S + t T`` with ``(s, t)`` in the unit square. The rest
    lattice sits at ``Q + (i/n_s) S + (j/n_t) T`` so the undeformed map is the
    identity. Design variables are y-displacements of the active control
    points; by default the left-most and right-most columns and the bottom row
    stay fixed.
    """

    def __init__(self, origin, s_axis, t_axis, n_s, n_t, active=None):
        self.origin = np.asarray(origin, dtype=float)
        self.S = np.asarray(s_axis, dtype=float)
        self.T = np.asarray(t_axis, dtype=float)
        self.n_s, self.n_t = int(n_s), int(n_t)
        if self.n_s < 1 or self.n_t < 1:
            raise ValueError("lattice needs at least two points per direction")
        cross = self.S[0] * self.T[1] - self.S[1] * self.T[0]
        if abs(cross) <= 1e-14 * np.linalg.norm(self.S) * np.linalg.norm(self.T):
            raise ValueError("degenerate box: S and T are parallel")
        self._cross = cross
        if active is None:
            ii, jj = np.meshgrid(np.arange(1, self.n_s), np.arange(1, self.n_t + 1), indexing="ij")
            active = np.stack([ii.ravel(), jj.ravel()], axis=1)
        self.active = np.asarray(active, dtype=np.int64).reshape(-1, 2)

    @classmethod
    def for_bump(cls, n_design, origin=(-1.4, -0.1), s_axis=(2.8, 0.0), t_axis=(0.0, 0.6)):
        """Box around the lower wall with exactly ``n_design`` active y-variables.

        The lattice has ``n_design/2 + 2`` columns and 3 rows.
        """
        if n_design < 2 or n_design % 2:
            raise ValueError("number of design variables must be a positive even integer")
        return cls(origin, s_axis, t_axis, n_design // 2 + 1, 2)

    @property
    def n_design(self):
        return self.active.shape[0]

    def rest_lattice(self):
        """Control point coordinates of the undeformed lattice, ``(n_s+1, n_t+1, 2)``."""
        i = np.arange(self.n_s + 1)[:, None, None] / self.n_s
        j = np.arange(self.n_t + 1)[None, :, None] / self.n_t
        return self.origin + i * self.S + j * self.T

    def lattice(self, z):
        """Control points displaced by design vector ``z`` (y-components only)."""
        P = self.rest_lattice()
        P[self.active[:, 0], self.active[:, 1], 1] += np.asarray(z, dtype=float)
        return P

    def embed(self, points, tol=1e-12):
        """Local coordinates ``(s, t)`` of points, shape ``(m, 2)``."""
        d = np.atleast_2d(np.asarray(points, dtype=float)) - self.origin
        s = (d[:, 0] * self.T[1] - d[:, 1] * self.T[0]) / self._cross
        t = (self.S[0] * d[:, 1] - self.S[1] * d[:, 0]) / self._cross
        st = np.stack([s, t], axis=1)
        bad = np.any((st < -tol) | (st > 1.0 + tol), axis=1)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise FfdEmbeddingError(f"point {d[k] + self.origin} lies outside the box (s, t) = {st[k]}")
        return np.clip(st, 0.0, 1.0)

    def weights(self, st):
        """Bernstein products ``B_i(s) B_j(t)``, shape ``(m, n_s+1, n_t+1)``."""
        st = np.atleast_2d(st)
        return bernstein(self.n_s, st[:, 0])[:, :, None] * bernstein(self.n_t, st[:, 1])[:, None, :]

    def deform(self, P, st):
        """Deformed positions of embedded points for control grid ``P``."""
        return np.einsum("mij,ijd->md", self.weights(st), np.asarray(P, dtype=float))

    def surface_jacobian(self, st):
        """Constant sparse ``d x_surf / d z`` with rows ordered (point, direction)."""
        W = self.weights(st)[:, self.active[:, 0], self.active[:, 1]]  # (m, n)
        m, n = W.shape
        rows = np.repeat(2 * np.arange(m) + 1, n)
        cols = np.tile(np.arange(n), m)
        J = sp.csr_matrix((W.ravel(), (rows, cols)), shape=(2 * m, n))
        J.eliminate_zeros()
        return J

    def to_json(self, z=None):
        data = {"origin": self.origin.tolist(), "S": self.S.tolist(), "T": self.T.tolist(),
                "n_s": self.n_s, "n_t": self.n_t, "active": self.active.tolist()}
        if z is not None:
            data["z"] = np.asarray(z, dtype=float).tolist()
            data["lattice"] = self.lattice(z).tolist()
        return json.dumps(data)

    @classmethod
    def from_json(cls, text):
        """Rebuild a box; returns ``(box, z)`` with ``z`` None when not stored."""
        data = json.loads(text)
        box = cls(data["origin"], data["S"], data["T"], data["n_s"], data["n_t"], data["active"])
        z = np.asarray(data["z"]) if "z" in data else None
        return box, z


class WallParameterization:
    """FFD applied to the lower-wall geometry nodes of a DG mesh.

    Wall nodes inside the box are embedded once; those outside stay fixed.
    ``jacobian`` maps design variables to the full geometry vector restricted
    to the wall (zeros elsewhere).
    """

    def __init__(self, disc, box: FfdBox):
        self.disc = disc
        self.box = box
        nodes = disc.boundary_nodes("wall_bottom")
        xy = disc.nodes[nodes]
        d = xy - box.origin
        s = (d[:, 0] * box.T[1] - d[:, 1] * box.T[0]) / box._cross
        t = (box.S[0] * d[:, 1] - box.S[1] * d[:, 0]) / box._cross
        inside = (s >= -1e-12) & (s <= 1 + 1e-12) & (t >= -1e-12) & (t <= 1 + 1e-12)
        self.nodes = nodes[inside]
        self.st = box.embed(xy[inside])
        J = box.surface_jacobian(self.st).tocoo()
        gdof = 2 * self.nodes[J.row // 2] + J.row % 2
        self.jacobian = sp.csr_matrix((J.data, (gdof, J.col)), shape=(disc.n_geom, box.n_design))

    def surface_displacement(self, z):
        """Geometry-vector displacement of the wall nodes for design ``z``."""
        P = self.box.lattice(z)
        moved = self.box.deform(P, self.st)
        rest = self.box.deform(self.box.rest_lattice(), self.st)
        out = np.zeros(self.disc.n_geom)
        out[2 * self.nodes] = moved[:, 0] - rest[:, 0]
        out[2 * self.nodes + 1] = moved[:, 1] - rest[:, 1]
        return out
