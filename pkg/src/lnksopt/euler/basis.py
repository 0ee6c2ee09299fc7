"""1D Lagrange bases, Gauss quadrature and tensor-product interpolation."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """``n``-point Gauss-Legendre rule on [-1, 1]."""
    x, w = legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=None)
def gauss_lobatto(n):
    """``n``-point Gauss-Lobatto nodes and weights on [-1, 1] (n >= 2)."""
    if n < 2:
        raise ValueError("Gauss-Lobatto needs at least two points")
    c = np.zeros(n)
    c[-1] = 1.0
    interior = legendre.legroots(legendre.legder(c)) if n > 2 else np.array([])
    x = np.concatenate(([-1.0], np.sort(interior.real), [1.0]))
    P = legendre.legval(x, c)
    w = 2.0 / (n * (n - 1) * P ** 2)
    return x, w


def lagrange(nodes, x):
    """Values and first derivatives of the Lagrange basis on ``nodes`` at ``x``.

    Returns arrays of shape ``(len(x), len(nodes))``.
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    V = np.ones((len(x), n))
    D = np.zeros((len(x), n))
    for j in range(n):
        others = np.delete(nodes, j)
        denom = np.prod(nodes[j] - others)
        terms = x[:, None] - others[None, :]
        V[:, j] = np.prod(terms, axis=1) / denom
        for k in range(n - 1):
            D[:, j] += np.prod(np.delete(terms, k, axis=1), axis=1) / denom
    return V, D


def tensor(a, b):
    """Tensor product of 1D tables: row ``(qa, qb) -> qa + na*qb`` and the
    same ordering for basis columns."""
    na_q, na = a.shape
    nb_q, nb = b.shape
    return np.einsum("ai,bj->baji", a, b).reshape(na_q * nb_q, na * nb)


class ReferenceElement:
    """Interpolation tables on the reference square for degree ``p``.

    The solution basis is Lagrange at Gauss-Legendre points, the geometry
    basis (degree ``q``, by default ``p``) is Lagrange at Gauss-Lobatto points. Local faces are numbered
    0: xi=-1, 1: xi=+1, 2: eta=-1, 3: eta=+1.
    """

    NORMALS = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])

    def __init__(self, p, n_quad=None, q=None):
        self.p = p
        self.q = p if q is None else q
        nq = max(p, self.q) + 1 if n_quad is None else n_quad
        self.n1 = p + 1
        self.n_p = (p + 1) ** 2
        self.sol_nodes = gauss_legendre(p + 1)[0]
        self.geo_nodes = gauss_lobatto(self.q + 1)[0]
        xq, wq = gauss_legendre(nq)
        self.nq1 = nq
        self.quad_1d = (xq, wq)
        self.wq = np.outer(wq, wq).ravel()  # ordering qa + nq*qb
        self.xq = np.stack(np.meshgrid(xq, xq, indexing="xy"), axis=-1).reshape(-1, 2)

        Vs, Ds = lagrange(self.sol_nodes, xq)
        Vg, Dg = lagrange(self.geo_nodes, xq)
        self.phi = tensor(Vs, Vs)
        self.dphi = (tensor(Ds, Vs), tensor(Vs, Ds))
        self.geo = tensor(Vg, Vg)
        self.dgeo = (tensor(Dg, Vg), tensor(Vg, Dg))

        # face tables, quadrature ordered along the face in increasing xi or eta
        one = np.array([1.0])
        ends = {-1.0: lagrange(self.sol_nodes, -one), 1.0: lagrange(self.sol_nodes, one)}
        gends = {-1.0: lagrange(self.geo_nodes, -one), 1.0: lagrange(self.geo_nodes, one)}
        self.wf = wq.copy()
        self.face_phi = []
        self.face_geo = []
        self.face_dgeo = []
        for f in range(4):
            side = -1.0 if f in (0, 2) else 1.0
            Ve, _ = ends[side]
            Gv, Gd = gends[side]
            if f < 2:  # xi fixed, runs along eta
                self.face_phi.append(tensor(Ve, Vs))
                self.face_geo.append(tensor(Gv, Vg))
                self.face_dgeo.append((tensor(Gd, Vg), tensor(Gv, Dg)))
            else:
                self.face_phi.append(tensor(Vs, Ve))
                self.face_geo.append(tensor(Vg, Gv))
                self.face_dgeo.append((tensor(Dg, Gv), tensor(Vg, Gd)))
        # face-local 1D coordinate of the geometry along the face
        self.face_quad_1d = xq
