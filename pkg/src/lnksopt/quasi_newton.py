"""Full-memory BFGS and a backtracking Armijo line search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class Bfgs:
    """Dense BFGS model kept in both direct (``B``) and inverse (``H``) form.

    Starts from the identity. Updates are skipped when the curvature
    condition ``s.y > 1e-12 |s||y|`` fails, which keeps both forms SPD.
    """

    def __init__(self, n, curvature_tol=1e-12):
        self.n = n
        self.curvature_tol = curvature_tol
        self.reset()

    def reset(self):
        self.B = np.eye(self.n)
        self.H = np.eye(self.n)
        self.updates = 0
        self.skipped = 0
        self.resets = getattr(self, "resets", -1) + 1

    def update(self, s, y):
        s = np.asarray(s, dtype=float)
        y = np.asarray(y, dtype=float)
        sy = float(s @ y)
        if not sy > self.curvature_tol * np.linalg.norm(s) * np.linalg.norm(y):
            self.skipped += 1
            return False
        rho = 1.0 / sy
        V = np.eye(self.n) - rho * np.outer(s, y)
        self.H = V @ self.H @ V.T + rho * np.outer(s, s)
        Bs = self.B @ s
        self.B = self.B - np.outer(Bs, Bs) / float(s @ Bs) + rho * np.outer(y, y)
        # symmetrize against round-off drift
        self.H = 0.5 * (self.H + self.H.T)
        self.B = 0.5 * (self.B + self.B.T)
        self.updates += 1
        return True

    def apply(self, v):
        return self.B @ v

    def apply_inverse(self, v):
        return self.H @ v


class LineSearchError(RuntimeError):
    def __init__(self, message, trials):
        super().__init__(message)
        self.trials = list(trials)


@dataclass
class LineSearchResult:
    alpha: float
    value: float
    halvings: int
    payload: object


def armijo(evaluate, f0, slope, c1=1e-4, factor=0.5, max_halvings=30, alpha0=1.0):
    """Backtrack until ``f(alpha) <= f0 + c1 alpha min(slope, 0)``.

    ``evaluate(alpha)`` returns ``(value, payload)`` and may raise
    ``ArithmeticError``/``ValueError``/``RuntimeError`` for infeasible trial
    points (invalid mesh, non-physical state, failed flow solve); such trials
    are treated as rejected.
    """
    alpha = alpha0
    trials = []
    slope = min(float(slope), 0.0)
    for k in range(max_halvings + 1):
        try:
            value, payload = evaluate(alpha)
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            trials.append((alpha, str(exc)))
            alpha *= factor
            continue
        trials.append((alpha, value))
        if np.isfinite(value) and value <= f0 + c1 * alpha * slope:
            return LineSearchResult(alpha, float(value), k, payload)
        alpha *= factor
    raise LineSearchError(f"line search failed after {max_halvings} halvings", trials)
