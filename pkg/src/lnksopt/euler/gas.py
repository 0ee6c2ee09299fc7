"""Ideal-gas relations and the nondimensional free stream.

States are handled as lists of four components ``[rho, rho_u, rho_v, rho_E]``
whose entries are either numpy arrays or :class:`~lnksopt.euler.jet.Jet`
objects, so every function here is differentiable by the jet machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jet as J

GAMMA = 1.4


class NonPhysicalStateError(ValueError):
    """Raised when density or pressure is not positive at an evaluation point."""


@dataclass(frozen=True)
class FreeStream:
    """Free stream with unit density and unit speed of sound."""

    mach: float = 0.3
    gamma: float = GAMMA

    @property
    def rho(self):
        return 1.0

    @property
    def c(self):
        return 1.0

    @property
    def p(self):
        return 1.0 / self.gamma

    @property
    def velocity(self):
        return np.array([self.mach * self.c, 0.0])

    @property
    def temperature(self):
        # gas constant 1/gamma makes T = c^2
        return self.c ** 2

    @property
    def total_pressure(self):
        g = self.gamma
        return self.p * (1.0 + 0.5 * (g - 1.0) * self.mach ** 2) ** (g / (g - 1.0))

    @property
    def total_temperature(self):
        return self.temperature * (1.0 + 0.5 * (self.gamma - 1.0) * self.mach ** 2)

    def conservative(self):
        v = self.velocity
        E = self.p / (self.gamma - 1.0) + 0.5 * self.rho * (v @ v)
        return np.array([self.rho, self.rho * v[0], self.rho * v[1], E])


@dataclass(frozen=True)
class FlowBoundaryConditions:
    """Subsonic inlet total conditions and outlet static pressure."""

    total_pressure: float
    total_temperature: float
    inlet_mach: float
    outlet_pressure: float
    gamma: float = GAMMA

    def __post_init__(self):
        for name in ("total_pressure", "total_temperature", "inlet_mach", "outlet_pressure"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.inlet_mach >= 1.0:
            raise ValueError("inlet must be subsonic")

    @classmethod
    def from_freestream(cls, fs: FreeStream):
        return cls(fs.total_pressure, fs.total_temperature, fs.mach, fs.p, fs.gamma)


def pressure(u, gamma=GAMMA):
    r, mx, my, E = u
    return (gamma - 1.0) * (E - 0.5 * (mx * mx + my * my) / r)


def primitive(u, gamma=GAMMA):
    """Return ``rho, vx, vy, p``."""
    r, mx, my, E = u
    inv = 1.0 / r
    vx = mx * inv
    vy = my * inv
    p = (gamma - 1.0) * (E - 0.5 * (mx * vx + my * vy))
    return r, vx, vy, p


def conservative(r, vx, vy, p, gamma=GAMMA):
    return [r, r * vx, r * vy, p / (gamma - 1.0) + 0.5 * r * (vx * vx + vy * vy)]


def euler_flux(u, gamma=GAMMA):
    """Cartesian fluxes ``(fx, fy)``, each a list of four components."""
    r, vx, vy, p = primitive(u, gamma)
    E = u[3]
    fx = [u[1], u[1] * vx + p, u[2] * vx, (E + p) * vx]
    fy = [u[2], u[1] * vy, u[2] * vy + p, (E + p) * vy]
    return fx, fy


def normal_flux(u, n, gamma=GAMMA):
    """Analytic flux in direction ``n`` (not necessarily unit length)."""
    r, vx, vy, p = primitive(u, gamma)
    vn = vx * n[0] + vy * n[1]
    return [r * vn, u[1] * vn + p * n[0], u[2] * vn + p * n[1], (u[3] + p) * vn]


def check_physical(rho, p, where=""):
    rho = J.value(rho)
    p = J.value(p)
    bad = np.flatnonzero((rho <= 0.0) | (p <= 0.0) | ~np.isfinite(rho) | ~np.isfinite(p))
    if bad.size:
        i = bad[0]
        raise NonPhysicalStateError(
            f"non-physical state{where} at point {i}: rho={rho.flat[i]:.3e}, p={p.flat[i]:.3e}")


def entropy_deviation(u, fs: FreeStream):
    """Pointwise ``p/p_inf (rho_inf/rho)^gamma - 1``."""
    r = u[0]
    p = pressure(u, fs.gamma)
    return p / fs.p * (fs.rho / r) ** fs.gamma - 1.0
