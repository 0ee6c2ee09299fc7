"""Dense verification of the P2/P4 preconditioned KKT systems.

Small random KKT systems are built explicitly so that the preconditioned
operators, their block templates and their spectra can be compared with
dense linear algebra.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .kkt import CompositeKktVector, apply_p2_inverse, apply_p4_inverse, dense_blocks
from .linalg import dense_eig, match_spectra


@dataclass
class SyntheticKktProblem:
    Luu: np.ndarray
    Luz: np.ndarray
    Lzz: np.ndarray  # partial second derivative in the controls
    Ru: np.ndarray
    Rz: np.ndarray
    B: np.ndarray

    @classmethod
    def random(cls, n_s, n, seed=0, shift=3.0):
        """Entries uniform in [-1, 1]; ``R_u`` shifted by ``shift * I``, ``B`` SPD."""
        rng = np.random.default_rng(seed)
        u = lambda *s: rng.uniform(-1.0, 1.0, s)
        A = u(n_s, n_s)
        Z = u(n, n)
        C = u(n, n)
        return cls(Luu=0.5 * (A + A.T), Luz=u(n_s, n), Lzz=0.5 * (Z + Z.T),
                   Ru=u(n_s, n_s) + shift * np.eye(n_s), Rz=u(n_s, n),
                   B=C @ C.T + n * np.eye(n))

    @property
    def n_s(self):
        return self.Ru.shape[0]

    @property
    def n(self):
        return self.Rz.shape[1]

    def _inv(self):
        if np.linalg.cond(self.Ru) > 1e12:
            raise np.linalg.LinAlgError("R_u is numerically singular")
        return np.linalg.inv(self.Ru), np.linalg.inv(self.B)

    @property
    def Lyy(self):
        return self.Luz - self.Luu @ np.linalg.solve(self.Ru, self.Rz)

    @property
    def reduced_hessian(self):
        W = np.linalg.solve(self.Ru, self.Rz)
        return (W.T @ self.Luu @ W - W.T @ self.Luz - self.Luz.T @ W + self.Lzz)

    def with_exact_hessian(self):
        return SyntheticKktProblem(self.Luu, self.Luz, self.Lzz, self.Ru, self.Rz, self.reduced_hessian)

    def kkt(self):
        Z = np.zeros((self.n_s, self.n_s))
        return np.block([[self.Luu, self.Luz, self.Ru.T],
                         [self.Luz.T, self.Lzz, self.Rz.T],
                         [self.Ru, self.Rz, Z]])

    def K1(self):
        Ri, _ = self._inv()
        I, Zs, Zsn = np.eye(self.n_s), np.zeros((self.n_s, self.n_s)), np.zeros((self.n_s, self.n))
        return np.block([[self.Luu @ Ri, Zsn, I],
                         [self.Luz.T @ Ri, np.eye(self.n), self.Rz.T @ Ri.T],
                         [I, Zsn, Zs]])

    def K2(self):
        Zs, Zns = np.zeros((self.n_s, self.n_s)), np.zeros((self.n, self.n_s))
        return np.block([[self.Ru, self.Rz, Zs],
                         [Zns, self.B, Zns],
                         [Zs, self.Lyy, self.Ru.T]])

    def P4(self):
        return self.K1() @ self.K2()

    def P2(self):
        Zs, Zsn = np.zeros((self.n_s, self.n_s)), np.zeros((self.n_s, self.n))
        return np.block([[Zs, Zsn, self.Ru.T],
                         [Zsn.T, self.B, self.Rz.T],
                         [self.Ru, self.Rz, Zs]])

    # -- explicit templates -------------------------------------------------
    def K1_inverse(self):
        Ri, _ = self._inv()
        I, Zs, Zsn = np.eye(self.n_s), np.zeros((self.n_s, self.n_s)), np.zeros((self.n_s, self.n))
        return np.block([[Zs, Zsn, I],
                         [-self.Rz.T @ Ri.T, np.eye(self.n), -self.Lyy.T @ Ri],
                         [I, Zsn, -self.Luu @ Ri]])

    def K2_inverse(self):
        Ri, Bi = self._inv()
        Zs, Zns = np.zeros((self.n_s, self.n_s)), np.zeros((self.n, self.n_s))
        return np.block([[Ri, -Ri @ self.Rz @ Bi, Zs],
                         [Zns, Bi, Zns],
                         [Zs, -Ri.T @ self.Lyy @ Bi, Ri.T]])

    def P2_inverse(self):
        Ri, Bi = self._inv()
        W = Ri @ self.Rz
        Zsn, Zs = np.zeros((self.n_s, self.n)), np.zeros((self.n_s, self.n_s))
        return np.block([[W @ Bi @ W.T, -W @ Bi, Ri],
                         [-Bi @ W.T, Bi, Zsn.T],
                         [Ri.T, Zsn, Zs]])

    def p4_template(self):
        """Block form of ``P4^-1 K``."""
        Ri, Bi = self._inv()
        I, Zs, Zsn = np.eye(self.n_s), np.zeros((self.n_s, self.n_s)), np.zeros((self.n_s, self.n))
        E = np.eye(self.n) - Bi @ self.reduced_hessian
        return np.block([[I, Ri @ self.Rz @ E, Zs],
                         [Zsn.T, Bi @ self.reduced_hessian, Zsn.T],
                         [Zs, Ri.T @ self.Lyy @ E, I]])

    def p4_template_original(self):
        """The earlier published block-diagonal form (zero off-diagonal blocks)."""
        _, Bi = self._inv()
        I, Zs, Zsn = np.eye(self.n_s), np.zeros((self.n_s, self.n_s)), np.zeros((self.n_s, self.n))
        return np.block([[I, Zsn, Zs],
                         [Zsn.T, Bi @ self.reduced_hessian, Zsn.T],
                         [Zs, Zsn, I]])

    def p2_template(self):
        """Block form of ``P2^-1 K``."""
        Ri, Bi = self._inv()
        W = Ri @ self.Rz
        LyyT = self.Lyy.T
        Lzz = self.reduced_hessian
        Zsn = np.zeros((self.n_s, self.n))
        return np.block([[np.eye(self.n_s) - W @ Bi @ LyyT, W - W @ Bi @ (Lzz + LyyT @ W), Zsn @ Zsn.T],
                         [Bi @ LyyT, Bi @ (Lzz + LyyT @ W), Zsn.T],
                         [Ri.T @ self.Luu, Ri.T @ self.Luz, np.eye(self.n_s)]])

    def blocks(self):
        Ri, Bi = self._inv()
        return dense_blocks(self.Luu, self.Luz, self.Lzz, self.Ru, self.Rz, self.B, Ri, Bi)


def deviation(a, b):
    """Max-norm difference scaled by ``max(1, max|b|)``.

    Random blocks with entries in [-1, 1] give ``R_u`` condition numbers up
    to ~1e3 at ``n_s = 40``, so the preconditioned operators carry entries of
    order 1e7; an unscaled comparison would measure round-off, not algebra.
    """
    b = np.asarray(b)
    return float(np.abs(np.asarray(a) - b).max() / max(1.0, np.abs(b).max()))


def build_preconditioned_operator(problem: SyntheticKktProblem, which="P4"):
    """Dense ``P^-1 K`` from dense factorizations (``P4^-1 = K2^-1 K1^-1``)."""
    K = problem.kkt()
    if which == "P4":
        return np.linalg.solve(problem.K2(), np.linalg.solve(problem.K1(), K))
    if which == "P2":
        return np.linalg.solve(problem.P2(), K)
    raise ValueError(f"unknown preconditioner {which!r}")


def expected_spectrum(problem: SyntheticKktProblem):
    mu = np.linalg.eigvals(np.linalg.solve(problem.B, problem.reduced_hessian))
    return np.concatenate([mu, np.ones(2 * problem.n_s)])


def _spectral_deviation(a, b):
    return match_spectra(a, b) / max(1.0, float(np.abs(b).max()))


def verify_spectrum(problem: SyntheticKktProblem, which="P4"):
    ev = dense_eig(build_preconditioned_operator(problem, which))
    exp = expected_spectrum(problem)
    return {"which": which, "max_deviation": _spectral_deviation(ev, exp),
            "eigenvalues": [[float(e.real), float(e.imag)] for e in ev]}


def verify_block_inverses(problem: SyntheticKktProblem):
    I = np.eye(2 * problem.n_s + problem.n)
    K1, K2 = problem.K1(), problem.K2()
    P4_inv = problem.K2_inverse() @ problem.K1_inverse()
    return {
        "K1": deviation(K1 @ problem.K1_inverse(), I),
        "K2": deviation(K2 @ problem.K2_inverse(), I),
        "P4": deviation(P4_inv, np.linalg.solve(K2, np.linalg.solve(K1, I))),
        "P2": deviation(problem.P2_inverse() @ problem.P2(), I),
    }


def verify_algorithmic(problem: SyntheticKktProblem, seed=0, n_vectors=3):
    """Compare the 2-/4-solve applications with the dense templates on random vectors."""
    rng = np.random.default_rng(seed)
    blk = problem.blocks()
    P4_inv = problem.K2_inverse() @ problem.K1_inverse()
    P2_inv = problem.P2_inverse()
    dev = {"P2": 0.0, "P4": 0.0}
    for _ in range(n_vectors):
        r = rng.standard_normal(2 * problem.n_s + problem.n)
        rv = CompositeKktVector.from_flat(r, problem.n_s, problem.n)
        dev["P2"] = max(dev["P2"], deviation(apply_p2_inverse(blk, rv).flat, P2_inv @ r))
        dev["P4"] = max(dev["P4"], deviation(apply_p4_inverse(blk, rv).flat, P4_inv @ r))
    return dev


def verify_problem(problem: SyntheticKktProblem, seed=0):
    """Full per-problem report: templates, spectra, inverses, algorithms."""
    P4K = build_preconditioned_operator(problem, "P4")
    P2K = build_preconditioned_operator(problem, "P2")
    sp4 = verify_spectrum(problem, "P4")
    sp2 = verify_spectrum(problem, "P2")
    return {
        "n_s": problem.n_s, "n": problem.n,
        "p4_template": deviation(P4K, problem.p4_template()),
        "p2_template": deviation(P2K, problem.p2_template()),
        "p4_original_gap": float(np.linalg.norm(problem.p4_template() - problem.p4_template_original())),
        "p4_spectrum": sp4["max_deviation"],
        "p2_spectrum": sp2["max_deviation"],
        "p2_vs_p4_spectrum": _spectral_deviation(dense_eig(P2K), dense_eig(P4K)),
        "inverses": verify_block_inverses(problem),
        "algorithmic": verify_algorithmic(problem, seed),
    }


def run_lab(sizes=((5, 2), (10, 4), (20, 6), (40, 10)), seeds=range(50)):
    """Verify every size/seed combination; returns the list of reports."""
    return [dict(verify_problem(SyntheticKktProblem.random(n_s, n, seed), seed), seed=int(seed))
            for n_s, n in sizes for seed in seeds]


def report_json(reports):
    return json.dumps(reports, indent=1)
