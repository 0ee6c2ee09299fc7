"""Restarted (flexible) GMRES with right preconditioning."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Operator = Callable[[np.ndarray], np.ndarray]


@dataclass
class KrylovConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 0.0
    max_iters: int = 2000
    restart: int = 200
    flexible: bool = True

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.restart < 1:
            raise ValueError("restart must be >= 1")


@dataclass
class KrylovResult:
    x: np.ndarray
    iters: int
    converged: bool
    # "converged", "max_iters" or "breakdown" (zero Arnoldi norm before convergence)
    status: str
    residuals: list = field(default_factory=list)

    @property
    def residual_norm(self) -> float:
        return self.residuals[-1]


def _identity(v):
    return v


def fgmres(
    apply_A: Operator,
    b: np.ndarray,
    apply_M: Optional[Operator] = None,
    cfg: Optional[KrylovConfig] = None,
    x0: Optional[np.ndarray] = None,
) -> KrylovResult:
    """Solve ``A x = b`` with right-preconditioned restarted FGMRES.

    With right preconditioning the monitored residual is the true residual
    ``b - A x``, so ``rel_tol`` always refers to ``||b||``. Each Arnoldi step
    applies the preconditioner exactly once, and ``iters`` counts those steps.
    When ``cfg.flexible`` is False the preconditioned basis is not stored and
    the solution is recovered with one extra preconditioner application per
    restart cycle (plain right-preconditioned GMRES).
    """
    cfg = cfg or KrylovConfig()
    M = apply_M or _identity
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)

    bnorm = np.linalg.norm(b)
    target = max(cfg.rel_tol * bnorm, cfg.abs_tol)
    r = b - apply_A(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    history = [beta]
    if beta <= target or bnorm == 0.0:
        return KrylovResult(x, 0, True, "converged", history)

    total = 0
    while total < cfg.max_iters:
        m = min(cfg.restart, cfg.max_iters - total)
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n)) if cfg.flexible else None
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        breakdown = False
        j = -1
        for j in range(m):
            z = M(V[j])
            if Z is not None:
                Z[j] = z
            w = apply_A(z)
            total += 1
            wnorm0 = np.linalg.norm(w)
            # classical Gram-Schmidt, applied twice
            h = V[: j + 1] @ w
            w = w - h @ V[: j + 1]
            h2 = V[: j + 1] @ w
            w = w - h2 @ V[: j + 1]
            h += h2
            hn = np.linalg.norm(w)
            H[: j + 1, j] = h
            H[j + 1, j] = hn
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if not np.isfinite(denom) or denom == 0.0:
                breakdown = True
                j -= 1
                break
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            history.append(abs(g[j + 1]))
            if hn <= 1e-14 * max(wnorm0, 1e-300):
                breakdown = True
                break
            V[j + 1] = w / hn
            if abs(g[j + 1]) <= target:
                break
        k = j + 1
        if k > 0:
            y = _upper_solve(H[:k, :k], g[:k])
            if Z is not None:
                x = x + y @ Z[:k]
            else:
                x = x + M(y @ V[:k])
        r = b - apply_A(x)
        beta = np.linalg.norm(r)
        if beta <= target:
            history[-1] = min(history[-1], beta)
            return KrylovResult(x, total, True, "converged", history)
        if breakdown:
            return KrylovResult(x, total, False, "breakdown", history)
    return KrylovResult(x, total, False, "max_iters", history)


def _upper_solve(R, g):
    k = R.shape[0]
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        y[i] = (g[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y
