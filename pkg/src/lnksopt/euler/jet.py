"""Vectorized second-order forward-mode jets.

A :class:`Jet` carries, for ``P`` evaluation points at once, a value ``v``
(shape ``(P,)``), a gradient ``g`` (``(P, k)``) and optionally a Hessian ``h``
(``(P, k, k)``) with respect to ``k`` seeded inputs. Pointwise flux kernels are
written once against plain arrays and run unchanged on jets, which yields
exact first and second derivatives of the kernel outputs.
"""

from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("v", "g", "h")
    __array_priority__ = 100.0

    def __init__(self, v, g, h=None):
        self.v = v
        self.g = g
        self.h = h

    @property
    def order(self):
        return 2 if self.h is not None else 1

    # -- construction -----------------------------------------------------
    @staticmethod
    def seed(values, order=2):
        """Seed the columns of ``values`` (shape ``(P, k)``) as independents."""
        values = np.asarray(values, dtype=float)
        P, k = values.shape
        out = []
        for a in range(k):
            g = np.zeros((P, k))
            g[:, a] = 1.0
            h = np.zeros((P, k, k)) if order == 2 else None
            out.append(Jet(values[:, a].copy(), g, h))
        return out

    # -- helpers ----------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        v = np.broadcast_to(np.asarray(other, dtype=float), self.v.shape)
        return Jet(v, np.zeros_like(self.g), None if self.h is None else np.zeros_like(self.h))

    def unary(self, f, df, d2f=None):
        """Compose with a scalar function given its value and derivatives."""
        g = df[:, None] * self.g
        h = None
        if self.h is not None:
            h = df[:, None, None] * self.h + d2f[:, None, None] * (self.g[:, :, None] * self.g[:, None, :])
        return Jet(f, g, h)

    # -- arithmetic -------------------------------------------------------
    def __neg__(self):
        return Jet(-self.v, -self.g, None if self.h is None else -self.h)

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v + other, self.g, self.h)
        h = None if self.h is None else self.h + other.h
        return Jet(self.v + other.v, self.g + other.g, h)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v - other, self.g, self.h)
        h = None if self.h is None else self.h - other.h
        return Jet(self.v - other.v, self.g - other.g, h)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            h = None if self.h is None else self.h * other[..., None, None] if other.ndim else self.h * other
            return Jet(self.v * other, self.g * (other[..., None] if other.ndim else other), h)
        v = self.v * other.v
        g = self.g * other.v[:, None] + other.g * self.v[:, None]
        h = None
        if self.h is not None:
            cross = self.g[:, :, None] * other.g[:, None, :]
            h = (self.h * other.v[:, None, None] + other.h * self.v[:, None, None]
                 + cross + np.swapaxes(cross, 1, 2))
        return Jet(v, g, h)

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.v
        return self.unary(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            raise TypeError("only constant exponents are supported")
        e = float(exponent)
        if e == 2.0:
            return self * self
        f = self.v ** e
        return self.unary(f, e * self.v ** (e - 1.0), e * (e - 1.0) * self.v ** (e - 2.0))

    # comparisons act on values (used only for branch selection)
    def __lt__(self, other):
        return self.v < value(other)

    def __gt__(self, other):
        return self.v > value(other)


def value(x):
    return x.v if isinstance(x, Jet) else np.asarray(x)


def sqrt(x):
    if isinstance(x, Jet):
        s = np.sqrt(x.v)
        return x.unary(s, 0.5 / s, -0.25 / (s * x.v))
    return np.sqrt(x)


def absolute(x):
    if isinstance(x, Jet):
        sgn = np.where(x.v >= 0.0, 1.0, -1.0)
        return x.unary(np.abs(x.v), sgn, np.zeros_like(x.v))
    return np.abs(x)


def where(mask, a, b):
    """Elementwise selection; ``mask`` is a boolean array over points."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.where(mask, a, b)
    ref = a if isinstance(a, Jet) else b
    a = ref._lift(a)
    b = ref._lift(b)
    v = np.where(mask, a.v, b.v)
    g = np.where(mask[:, None], a.g, b.g)
    h = None
    if a.h is not None and b.h is not None:
        h = np.where(mask[:, None, None], a.h, b.h)
    return Jet(v, g, h)


def stack_derivatives(outputs):
    """Collect ``(value, grad, hess)`` arrays from a list of jets.

    Returns arrays of shapes ``(P, m)``, ``(P, m, k)`` and ``(P, m, k, k)``
    (the last is ``None`` for first-order jets).
    """
    v = np.stack([o.v for o in outputs], axis=1)
    g = np.stack([o.g for o in outputs], axis=1)
    h = None
    if outputs[0].h is not None:
        h = np.stack([o.h for o in outputs], axis=1)
    return v, g, h
