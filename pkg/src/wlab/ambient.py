"""Smooth ambient maps with closed-form first and second derivatives.

Each map exposes ``evaluate(x) -> (F, DF, D2F)`` with shapes (..., m),
(..., m, n), (..., m, n, n), the protocol consumed by
:func:`wlab.jets.push_jet_ambient`.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularAmbientPoint
from .jets import _PAIRS, Jet2, identity_jet, push_jet_ambient, push_jet_linear


class AffineMap:
    """x ↦ M x + b."""

    def __init__(self, matrix, offset=None):
        self.matrix = np.asarray(matrix, dtype=float)
        m, n = self.matrix.shape
        self.offset = np.zeros(m) if offset is None else np.asarray(offset, dtype=float)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        F = x @ self.matrix.T + self.offset
        m, n = self.matrix.shape
        DF = np.broadcast_to(self.matrix, x.shape[:-1] + (m, n))
        D2F = np.zeros(x.shape[:-1] + (m, n, n))
        return F, DF, D2F

    def push(self, j):
        return push_jet_linear(j, self.matrix, self.offset)


class InverseStereographic:
    """R^2 -> S^2(radius) ⊂ R^3, z ↦ r (2x, 2y, |z|^2 - 1) / (1 + |z|^2)."""

    def __init__(self, radius=1.0):
        self.radius = float(radius)

    def evaluate(self, p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        s = 1.0 + x * x + y * y
        q = 1.0 / s
        # derivatives of q = 1/s
        qx, qy = -2.0 * x * q * q, -2.0 * y * q * q
        q3 = q * q * q
        qxx = -2.0 * q * q + 8.0 * x * x * q3
        qxy = 8.0 * x * y * q3
        qyy = -2.0 * q * q + 8.0 * y * y * q3
        r = self.radius
        F = r * np.stack([2 * x * q, 2 * y * q, 1.0 - 2.0 * q], axis=-1)
        DF = np.empty(p.shape[:-1] + (3, 2))
        DF[..., 0, 0] = 2 * q + 2 * x * qx
        DF[..., 0, 1] = 2 * x * qy
        DF[..., 1, 0] = 2 * y * qx
        DF[..., 1, 1] = 2 * q + 2 * y * qy
        DF[..., 2, 0] = -2 * qx
        DF[..., 2, 1] = -2 * qy
        D2 = np.empty(p.shape[:-1] + (3, 2, 2))
        D2[..., 0, 0, 0] = 4 * qx + 2 * x * qxx
        D2[..., 0, 0, 1] = D2[..., 0, 1, 0] = 2 * qy + 2 * x * qxy
        D2[..., 0, 1, 1] = 2 * x * qyy
        D2[..., 1, 0, 0] = 2 * y * qxx
        D2[..., 1, 0, 1] = D2[..., 1, 1, 0] = 2 * qx + 2 * y * qxy
        D2[..., 1, 1, 1] = 4 * qy + 2 * y * qyy
        D2[..., 2, 0, 0] = -2 * qxx
        D2[..., 2, 0, 1] = D2[..., 2, 1, 0] = -2 * qxy
        D2[..., 2, 1, 1] = -2 * qyy
        return F, r * DF, r * D2


class Veronese:
    """Quadratic map R^3 -> R^5 restricting to the Veronese embedding of RP^2 into S^4(1/3)."""

    def __init__(self):
        a = 1.0 / np.sqrt(3.0)
        b = a / (2.0 * np.sqrt(3.0))
        # each component is x^T Q_k x
        Q = np.zeros((5, 3, 3))
        Q[0, 1, 2] = Q[0, 2, 1] = a / 2
        Q[1, 0, 2] = Q[1, 2, 0] = a / 2
        Q[2, 0, 1] = Q[2, 1, 0] = a / 2
        Q[3] = np.diag([a / 2, -a / 2, 0.0])
        Q[4] = np.diag([b, b, -2 * b])
        self.Q = Q

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        Qx = np.einsum("kij,...j->...ki", self.Q, x)
        F = np.einsum("...ki,...i->...k", Qx, x)
        DF = 2.0 * Qx
        D2F = np.broadcast_to(2.0 * self.Q, x.shape[:-1] + self.Q.shape)
        return F, DF, D2F

    def push(self, j):
        Qx = np.einsum("kij,...j->...ki", self.Q, j.value)
        F = np.einsum("...ki,...i->...k", Qx, j.value)
        d1 = 2.0 * np.einsum("...ki,...ai->...ak", Qx, j.d1)
        Qd = np.einsum("kij,...aj->...aki", self.Q, j.d1)
        d2 = 2.0 * np.einsum("...ki,...si->...sk", Qx, j.d2)
        for k, (a, b) in enumerate(_PAIRS):
            d2[..., k, :] += 2.0 * np.einsum("...ki,...i->...k", Qd[..., a, :, :], j.d1[..., b, :])
        return Jet2(j.point, F, d1, d2)


class Stereographic:
    """Projection of the sphere of given radius in R^{n+1} from its pole r·e_{n+1} onto R^n."""

    def __init__(self, radius):
        self.radius = float(radius)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        R = self.radius
        xs, t = x[..., :-1], x[..., -1]
        den = R - t
        if np.any(den <= 0.0):
            raise SingularAmbientPoint("point at the projection pole")
        u = R / den
        n = xs.shape[-1]
        F = u[..., None] * xs
        DF = np.zeros(x.shape[:-1] + (n, n + 1))
        DF[..., :, :n] = u[..., None, None] * np.eye(n)
        DF[..., :, n] = xs * (u * u / R)[..., None]
        D2F = np.zeros(x.shape[:-1] + (n, n + 1, n + 1))
        c = (u * u / R)[..., None, None] * np.eye(n)
        D2F[..., :, :n, n] = c
        D2F[..., :, n, :n] = c
        D2F[..., :, n, n] = xs * (2.0 * u**3 / R**2)[..., None]
        return F, DF, D2F

    def push(self, j):
        R = self.radius
        x = j.value
        xs, t = x[..., :-1], x[..., -1]
        den = R - t
        if np.any(den <= 0.0):
            raise SingularAmbientPoint("point at the projection pole")
        u = (R / den)[..., None]
        c1, c2 = u * u / R, 2.0 * u**3 / R**2

        def D(v):
            return u * v[..., :-1] + c1 * v[..., -1:] * xs

        d1 = np.stack([D(j.d1[..., 0, :]), D(j.d1[..., 1, :])], -2)
        d2 = np.empty(j.d2.shape[:-1] + (xs.shape[-1],))
        for k, (a, b) in enumerate(_PAIRS):
            va, vb = j.d1[..., a, :], j.d1[..., b, :]
            hess = c1 * (va[..., :-1] * vb[..., -1:] + vb[..., :-1] * va[..., -1:]) + c2 * va[..., -1:] * vb[..., -1:] * xs
            d2[..., k, :] = hess + D(j.d2[..., k, :])
        return Jet2(j.point, u * xs, d1, d2)


class MapChain:
    """Composition of ambient maps, applied left to right."""

    def __init__(self, *maps):
        self.maps = tuple(maps)

    def evaluate(self, x):
        F, DF, D2F = self.maps[0].evaluate(x)
        for m in self.maps[1:]:
            G, DG, D2G = m.evaluate(F)
            D2F = np.einsum("...ijk,...ja,...kb->...iab", D2G, DF, DF, optimize=True) + np.einsum(
                "...ij,...jab->...iab", DG, D2F
            )
            DF = np.einsum("...ij,...ja->...ia", DG, DF)
            F = G
        return F, DF, D2F


def planar_chart(amap):
    """Chart evaluator points -> Jet2 for a map defined on the parameter plane."""

    def evaluate(points):
        return push_jet_ambient(identity_jet(points), amap)

    return evaluate
