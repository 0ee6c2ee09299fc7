"""KKT operator and the reduced-space factorization preconditioners P2 and P4.

Blocks are supplied as callables so the same code serves the dense
verification lab and the sparse optimizer. Unknowns are ordered
``(u, z, lambda)`` and the KKT matrix is::

    [ L_uu  L_uz  R_u^T ]
    [ L_zu  L_zz  R_z^T ]
    [ R_u   R_z   0     ]

where ``L_zz`` here is the partial second derivative in the controls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Op = Callable[[np.ndarray], np.ndarray]


@dataclass
class CompositeKktVector:
    u: np.ndarray
    z: np.ndarray
    lam: np.ndarray

    @property
    def sizes(self):
        return len(self.u), len(self.z)

    @property
    def flat(self):
        return np.concatenate([self.u, self.z, self.lam])

    @classmethod
    def from_flat(cls, v, n_s, n):
        v = np.asarray(v, dtype=float)
        if v.shape != (2 * n_s + n,):
            raise ValueError(f"expected length {2 * n_s + n}, got {v.shape}")
        return cls(v[:n_s].copy(), v[n_s:n_s + n].copy(), v[n_s + n:].copy())

    def dot(self, other):
        return float(self.u @ other.u + self.z @ other.z + self.lam @ other.lam)

    def norm(self):
        return float(np.sqrt(self.dot(self)))

    def block_norms(self):
        return tuple(float(np.linalg.norm(b)) for b in (self.u, self.z, self.lam))


@dataclass
class KktBlocks:
    """Block actions of a KKT system and its preconditioner ingredients.

    ``Ru_solve``/``RuT_solve`` are the flow-Jacobian solves used by the
    preconditioners; they may be exact solves or incomplete-factorization
    applications. ``B_solve`` applies the inverse reduced-Hessian model.
    """

    n_s: int
    n: int
    Luu: Op
    Luz: Op
    Lzu: Op
    Lzz: Op
    Ru: Op
    RuT: Op
    Rz: Op
    RzT: Op
    Ru_solve: Op
    RuT_solve: Op
    B_solve: Op

    def apply(self, x: CompositeKktVector) -> CompositeKktVector:
        """KKT matrix action."""
        return CompositeKktVector(
            self.Luu(x.u) + self.Luz(x.z) + self.RuT(x.lam),
            self.Lzu(x.u) + self.Lzz(x.z) + self.RzT(x.lam),
            self.Ru(x.u) + self.Rz(x.z),
        )

    def apply_flat(self, v):
        return self.apply(CompositeKktVector.from_flat(v, self.n_s, self.n)).flat


def apply_p2_inverse(b: KktBlocks, r: CompositeKktVector) -> CompositeKktVector:
    """Two flow-Jacobian solves: adjoint, reduced-Hessian model, forward."""
    y_lam = b.RuT_solve(r.u)
    y_z = b.B_solve(r.z - b.RzT(y_lam))
    y_u = b.Ru_solve(r.lam - b.Rz(y_z))
    return CompositeKktVector(y_u, y_z, y_lam)


def apply_p4_inverse(b: KktBlocks, r: CompositeKktVector) -> CompositeKktVector:
    """Four flow-Jacobian solves, ``P4^-1 = K2^-1 K1^-1``."""
    # K1^-1
    a = b.Ru_solve(r.lam)
    La = b.Luu(a)
    v = b.RuT_solve(La - r.u)
    t2 = r.z - b.Lzu(a) + b.RzT(v)
    t3 = r.u - La
    # K2^-1 on (r.lam, t2, t3)
    y_z = b.B_solve(t2)
    # w = R_u^-1 R_z y_z directly: forming it as a - R_u^-1 (r_lam - R_z y_z)
    # cancels badly once |R_z y_z| << |r_lam| and the solves are inexact
    w = b.Ru_solve(b.Rz(y_z))
    y_u = a - w
    # L_yy y_z = L_uz y_z - L_uu R_u^-1 R_z y_z
    Lyy_yz = b.Luz(y_z) - b.Luu(w)
    y_lam = b.RuT_solve(t3 - Lyy_yz)
    return CompositeKktVector(y_u, y_z, y_lam)


def dense_blocks(Luu, Luz, Lzz, Ru, Rz, B, Ru_inv=None, B_inv=None):
    """:class:`KktBlocks` backed by dense matrices with exact inverses."""
    Ru_inv = np.linalg.inv(Ru) if Ru_inv is None else Ru_inv
    B_inv = np.linalg.inv(B) if B_inv is None else B_inv
    return KktBlocks(
        n_s=Ru.shape[0], n=Rz.shape[1],
        Luu=lambda v: Luu @ v, Luz=lambda v: Luz @ v, Lzu=lambda v: Luz.T @ v,
        Lzz=lambda v: Lzz @ v, Ru=lambda v: Ru @ v, RuT=lambda v: Ru.T @ v,
        Rz=lambda v: Rz @ v, RzT=lambda v: Rz.T @ v,
        Ru_solve=lambda v: Ru_inv @ v, RuT_solve=lambda v: Ru_inv.T @ v,
        B_solve=lambda v: B_inv @ v,
    )
