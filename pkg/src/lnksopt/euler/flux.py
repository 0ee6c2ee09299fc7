"""Roe numerical flux and characteristic boundary states.

Normals passed to the flux functions are scaled normals ``N = |N| n``; the
returned flux is the flux through a face element of measure ``|N|``.
"""

from __future__ import annotations

import numpy as np

from . import jet as J
from .gas import GAMMA, FlowBoundaryConditions, normal_flux, primitive


def _abs_fixed(lam, eps):
    """Harten smoothing of ``|lam|`` below ``eps``."""
    a = J.absolute(lam)
    smooth = (lam * lam + eps * eps) / (2.0 * eps)
    return J.where(J.value(a) < J.value(eps), smooth, a)


def roe_flux(uL, uR, N, gamma=GAMMA, entropy_fix=True):
    """Roe flux through the scaled normal ``N`` (components lists or jets)."""
    area = J.sqrt(N[0] * N[0] + N[1] * N[1])
    nx = N[0] / area
    ny = N[1] / area

    rL, uxL, uyL, pL = primitive(uL, gamma)
    rR, uxR, uyR, pR = primitive(uR, gamma)
    if np.any(J.value(rL) <= 0.0) or np.any(J.value(rR) <= 0.0):
        raise ValueError("vanishing density in Roe average")
    HL = (uL[3] + pL) / rL
    HR = (uR[3] + pR) / rR

    sL = J.sqrt(rL)
    sR = J.sqrt(rR)
    wsum = sL + sR
    rho = sL * sR
    ux = (sL * uxL + sR * uxR) / wsum
    uy = (sL * uyL + sR * uyR) / wsum
    H = (sL * HL + sR * HR) / wsum
    q2 = ux * ux + uy * uy
    c = J.sqrt((gamma - 1.0) * (H - 0.5 * q2))
    vn = ux * nx + uy * ny

    l1 = vn - c
    l2 = vn
    l3 = vn + c
    if entropy_fix:
        eps = 0.1 * (J.absolute(vn) + c)
        a1 = _abs_fixed(l1, eps)
        a2 = _abs_fixed(l2, eps)
        a3 = _abs_fixed(l3, eps)
    else:
        a1, a2, a3 = J.absolute(l1), J.absolute(l2), J.absolute(l3)

    drho = rR - rL
    dp = pR - pL
    dux = uxR - uxL
    duy = uyR - uyL
    dvn = dux * nx + duy * ny

    c2 = c * c
    k1 = a1 * (dp - rho * c * dvn) / (2.0 * c2)
    k3 = a3 * (dp + rho * c * dvn) / (2.0 * c2)
    k2 = a2 * (drho - dp / c2)
    k4 = a2 * rho

    d0 = k1 + k2 + k3
    d1 = k1 * (ux - c * nx) + k2 * ux + k3 * (ux + c * nx) + k4 * (dux - dvn * nx)
    d2 = k1 * (uy - c * ny) + k2 * uy + k3 * (uy + c * ny) + k4 * (duy - dvn * ny)
    d3 = (k1 * (H - c * vn) + k2 * (0.5 * q2) + k3 * (H + c * vn)
          + k4 * (ux * dux + uy * duy - vn * dvn))

    n_unit = (nx, ny)
    fL = normal_flux(uL, n_unit, gamma)
    fR = normal_flux(uR, n_unit, gamma)
    diss = (d0, d1, d2, d3)
    return [area * (0.5 * (fL[k] + fR[k]) - 0.5 * diss[k]) for k in range(4)]


def roe_flux_array(uL, uR, n, gamma=GAMMA, entropy_fix=True):
    """Array front end: ``uL, uR`` of shape ``(P, 4)``, ``n`` of shape ``(P, 2)``."""
    uL = np.atleast_2d(np.asarray(uL, dtype=float))
    uR = np.atleast_2d(np.asarray(uR, dtype=float))
    n = np.atleast_2d(np.asarray(n, dtype=float))
    out = roe_flux(list(uL.T), list(uR.T), list(n.T), gamma, entropy_fix)
    return np.stack(out, axis=1)


def _unit(N):
    area = J.sqrt(N[0] * N[0] + N[1] * N[1])
    return N[0] / area, N[1] / area


def wall_state(u, N, gamma=GAMMA):
    """Mirror state: normal momentum reversed, density and energy kept."""
    nx, ny = _unit(N)
    mn = u[1] * nx + u[2] * ny
    return [u[0], u[1] - 2.0 * mn * nx, u[2] - 2.0 * mn * ny, u[3]]


def inlet_state(u, N, bc: FlowBoundaryConditions, direction=(1.0, 0.0)):
    """Subsonic inflow with fixed total pressure, total temperature and flow angle.

    The outgoing invariant ``v.n + 2c/(gamma-1)`` is taken from the interior;
    the boundary sound speed is the larger root of the total-enthalpy relation.
    """
    g = bc.gamma
    nx, ny = _unit(N)
    r, vx, vy, p = primitive(u, g)
    c = J.sqrt(g * p / r)
    rplus = vx * nx + vy * ny + 2.0 * c / (g - 1.0)
    cosang = direction[0] * nx + direction[1] * ny
    c0sq = bc.total_temperature  # T = c^2 in these units
    a = cosang * cosang
    qa = 1.0 / (g - 1.0) + 2.0 / (a * (g - 1.0) ** 2)
    qb = -2.0 * rplus / (a * (g - 1.0))
    qc = rplus * rplus / (2.0 * a) - c0sq / (g - 1.0)
    disc = qb * qb - 4.0 * qa * qc
    cb = (-qb + J.sqrt(disc)) / (2.0 * qa)
    speed = (rplus - 2.0 * cb / (g - 1.0)) / cosang
    Tb = cb * cb
    pb = bc.total_pressure * (Tb / c0sq) ** (g / (g - 1.0))
    rb = g * pb / Tb
    vxb = speed * direction[0]
    vyb = speed * direction[1]
    return [rb, rb * vxb, rb * vyb, pb / (g - 1.0) + 0.5 * rb * (vxb * vxb + vyb * vyb)]


def outlet_state(u, N, bc: FlowBoundaryConditions):
    """Subsonic outflow: static pressure imposed, entropy, outgoing invariant
    and tangential velocity extrapolated."""
    g = bc.gamma
    nx, ny = _unit(N)
    r, vx, vy, p = primitive(u, g)
    c = J.sqrt(g * p / r)
    vn = vx * nx + vy * ny
    rplus = vn + 2.0 * c / (g - 1.0)
    pb = bc.outlet_pressure
    rb = r * (pb / p) ** (1.0 / g)
    cb = J.sqrt(g * pb / rb)
    vnb = rplus - 2.0 * cb / (g - 1.0)
    vxb = vx + (vnb - vn) * nx
    vyb = vy + (vnb - vn) * ny
    return [rb, rb * vxb, rb * vyb, pb / (g - 1.0) + 0.5 * rb * (vxb * vxb + vyb * vyb)]
