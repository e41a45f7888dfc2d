"""Second-order jets of planar-parameter maps.

Every array carries arbitrary leading batch dimensions, so a single
``Jet2`` can hold the jets at a whole quadrature grid.  Second partials
are stored in the order (xx, xy, yy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateReparam, DivisionByZeroAtPole, SingularAmbientPoint

POLE_THRESHOLD = 1e-300

# (a, b) index pairs for the packed second-derivative slots
_PAIRS = ((0, 0), (0, 1), (1, 1))


@dataclass(frozen=True)
class ComplexJet2:
    """Value, first and second complex derivative of a holomorphic function."""

    z: np.ndarray
    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @classmethod
    def variable(cls, z):
        z = np.asarray(z, dtype=complex)
        return cls(z, z, np.ones_like(z), np.zeros_like(z))

    @classmethod
    def constant(cls, z, c):
        z = np.asarray(z, dtype=complex)
        v = np.broadcast_to(np.asarray(c, dtype=complex), z.shape).copy()
        zero = np.zeros_like(z)
        return cls(z, v, zero, zero)

    def _lift(self, other):
        if isinstance(other, ComplexJet2):
            return other
        return ComplexJet2.constant(self.z, other)

    def __add__(self, other):
        o = self._lift(other)
        return ComplexJet2(self.z, self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __neg__(self):
        return ComplexJet2(self.z, -self.value, -self.d1, -self.d2)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, ComplexJet2):
            c = np.asarray(other, dtype=complex)
            return ComplexJet2(self.z, self.value * c, self.d1 * c, self.d2 * c)
        a, b = self, other
        return ComplexJet2(
            self.z,
            a.value * b.value,
            a.d1 * b.value + a.value * b.d1,
            a.d2 * b.value + 2.0 * a.d1 * b.d1 + a.value * b.d2,
        )

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.value
        if np.any(np.abs(v) < POLE_THRESHOLD):
            raise DivisionByZeroAtPole("denominator vanishes (pole of the expression)")
        inv = 1.0 / v
        d1 = -self.d1 * inv * inv
        d2 = (2.0 * self.d1 * self.d1 * inv - self.d2) * inv * inv
        return ComplexJet2(self.z, inv, d1, d2)

    def __truediv__(self, other):
        return self * self._lift(other).reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, n):
        if int(n) != n:
            raise ValueError("only integer exponents are supported")
        n = int(n)
        if n == 0:
            return ComplexJet2.constant(self.z, 1.0)
        if n < 0:
            return self.reciprocal() ** (-n)
        v = self.value
        vn2 = v ** (n - 2) if n >= 2 else np.zeros_like(v)
        vn1 = v ** (n - 1)
        return ComplexJet2(
            self.z,
            v**n,
            n * vn1 * self.d1,
            n * (n - 1) * vn2 * self.d1 * self.d1 + n * vn1 * self.d2,
        )

    def stack(self, *others):
        """Stack this jet with others along a new trailing component axis."""
        jets = (self,) + others
        return ComplexJet2(
            self.z,
            np.stack([j.value for j in jets], axis=-1),
            np.stack([j.d1 for j in jets], axis=-1),
            np.stack([j.d2 for j in jets], axis=-1),
        )


def complexjet_arith(op, a, b=None):
    """Functional form of the jet arithmetic (``op`` in add/sub/mul/div/pow)."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "pow":
        return a**b
    raise ValueError(f"unknown jet operation {op!r}")


@dataclass(frozen=True)
class Jet2:
    """Value and partials up to order two of a map R^2 -> R^n.

    Shapes: point (..., 2), value (..., n), d1 (..., 2, n), d2 (..., 3, n).
    """

    point: np.ndarray
    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @property
    def ambient_dim(self):
        return self.value.shape[-1]

    def hessian(self):
        """Full symmetric (..., 2, 2, n) Hessian."""
        d2 = self.d2
        return np.stack(
            [np.stack([d2[..., 0, :], d2[..., 1, :]], axis=-2),
             np.stack([d2[..., 1, :], d2[..., 2, :]], axis=-2)],
            axis=-3,
        )

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.point, self.value + other.value, self.d1 + other.d1, self.d2 + other.d2)
        c = np.asarray(other, dtype=float)
        return Jet2(self.point, self.value + c, self.d1, self.d2)

    def __sub__(self, other):
        if isinstance(other, Jet2):
            return self + other * -1.0
        return self + (-np.asarray(other, dtype=float))

    def __mul__(self, c):
        """Multiply by a constant scalar, or by a scalar-valued Jet2 (product rule)."""
        if isinstance(c, Jet2):
            # whichever factor has one ambient coordinate acts as the scalar
            if self.ambient_dim == 1 and c.ambient_dim != 1:
                return scalar_times(self, c)
            return scalar_times(c, self)
        return Jet2(self.point, self.value * c, self.d1 * c, self.d2 * c)

    __rmul__ = __mul__

    def take(self, index):
        """Sub-jet at a batch index or mask."""
        return Jet2(self.point[index], self.value[index], self.d1[index], self.d2[index])

    def concat(self, other):
        """Concatenate ambient coordinates of two jets at the same points."""
        return Jet2(
            self.point,
            np.concatenate([self.value, other.value], axis=-1),
            np.concatenate([self.d1, other.d1], axis=-1),
            np.concatenate([self.d2, other.d2], axis=-1),
        )


def scalar_times(s, f):
    """Product jet of a scalar function s (Jet2 with n=1) and a map f."""
    sv = s.value[..., 0]
    s1 = s.d1[..., 0]
    s2 = s.d2[..., 0]
    v = sv[..., None] * f.value
    d1 = s1[..., :, None] * f.value[..., None, :] + sv[..., None, None] * f.d1
    d2 = np.empty(f.d2.shape)
    for k, (a, b) in enumerate(_PAIRS):
        d2[..., k, :] = (
            s2[..., k, None] * f.value
            + s1[..., a, None] * f.d1[..., b, :]
            + s1[..., b, None] * f.d1[..., a, :]
            + sv[..., None] * f.d2[..., k, :]
        )
    return Jet2(f.point, v, d1, d2)


def identity_jet(points):
    """Jet of the identity map of R^2 at ``points`` (..., 2)."""
    p = np.asarray(points, dtype=float)
    d1 = np.broadcast_to(np.eye(2), p.shape[:-1] + (2, 2)).copy()
    return Jet2(p, p.copy(), d1, np.zeros(p.shape[:-1] + (3, 2)))


def holomorphic_to_real_jet(h, embedding="c2"):
    """Real jet of a vector-valued holomorphic jet.

    ``embedding`` is either ``"c2"`` (each complex component gives two real
    coordinates, Re and Im), ``"re"`` (real part of each component) or an
    explicit sequence of ``(component, multiplier)`` pairs meaning the real
    coordinate ``Re(multiplier * h[component])``.
    """
    value = h.value if h.value.ndim > np.ndim(h.z) else h.value[..., None]
    d1 = h.d1 if h.d1.ndim > np.ndim(h.z) else h.d1[..., None]
    d2 = h.d2 if h.d2.ndim > np.ndim(h.z) else h.d2[..., None]
    k = value.shape[-1]
    if isinstance(embedding, str):
        if embedding == "c2":
            pairs = [(c, m) for c in range(k) for m in (1.0, -1j)]
        elif embedding == "re":
            pairs = [(c, 1.0) for c in range(k)]
        else:
            raise ValueError(f"unknown embedding {embedding!r}")
    else:
        pairs = list(embedding)
    comps = np.array([c for c, _ in pairs])
    mult = np.array([m for _, m in pairs], dtype=complex)
    v = value[..., comps] * mult
    f1 = d1[..., comps] * mult
    f2 = d2[..., comps] * mult
    z = np.asarray(h.z)
    point = np.stack([z.real, z.imag], axis=-1)
    d1r = np.stack([f1.real, (1j * f1).real], axis=-2)
    d2r = np.stack([f2.real, (1j * f2).real, -f2.real], axis=-2)
    return Jet2(point, v.real, d1r, d2r)


def push_jet_ambient(j, amap):
    """Compose a jet with a smooth ambient map (chain rule to second order).

    ``amap.evaluate(x)`` must return (F, DF, D2F) with shapes
    (..., m), (..., m, n), (..., m, n, n).  Compositions exposing ``steps``
    or ``maps`` are pushed one factor at a time, which never forms the
    ambient Hessian of the whole chain.
    """
    parts = getattr(amap, "steps", None) or getattr(amap, "maps", None)
    if parts is not None and len(parts) > 0:
        for part in parts:
            j = push_jet_ambient(j, part)
        return j
    if hasattr(amap, "push"):
        return amap.push(j)
    F, DF, D2F = amap.evaluate(j.value)
    d1 = np.matmul(j.d1, np.swapaxes(DF, -1, -2))
    d2 = np.matmul(j.d2, np.swapaxes(DF, -1, -2))
    for k, (a, b) in enumerate(_PAIRS):
        va, vb = j.d1[..., a, :], j.d1[..., b, :]
        d2[..., k, :] += np.matmul(np.matmul(D2F, vb[..., None, :, None])[..., 0], va[..., :, None])[..., 0]
    return Jet2(j.point, F, d1, d2)


def reparam_jet(j, phi):
    """Jet of f∘φ at w, given the jet ``j`` of f at φ(w) and the planar jet ``phi`` at w."""
    P1 = phi.d1  # (..., a, k) = ∂_a φ^k
    jac = P1[..., 0, 0] * P1[..., 1, 1] - P1[..., 0, 1] * P1[..., 1, 0]
    if np.any(np.abs(jac) < 1e-300):
        raise DegenerateReparam("planar reparametrization has a singular Jacobian")
    Hf = j.hessian()  # (..., k, l, n)
    d1 = np.einsum("...ak,...kn->...an", P1, j.d1)
    d2 = np.empty(j.d2.shape)
    for s, (a, b) in enumerate(_PAIRS):
        d2[..., s, :] = np.einsum("...kln,...k,...l->...n", Hf, P1[..., a, :], P1[..., b, :]) + np.einsum(
            "...kn,...k->...n", j.d1, phi.d2[..., s, :]
        )
    return Jet2(phi.point, j.value, d1, d2)


def push_jet_linear(j, L, shift=None):
    """Jet of x ↦ L x + shift composed with ``j``; no second-order term arises."""
    LT = np.asarray(L).T
    v = j.value @ LT
    if shift is not None:
        v = v + shift
    return Jet2(j.point, v, j.d1 @ LT, j.d2 @ LT)


def push_jet_inversion(j, center, radius):
    """Jet of x ↦ c + r²(x−c)/|x−c|² composed with ``j``, by dot products only."""
    y = j.value - center
    q = np.sum(y * y, -1)
    if np.any(q == 0.0):
        raise SingularAmbientPoint("point coincides with the inversion center")
    r2 = radius * radius
    iq = (1.0 / q)[..., None]
    yu = np.sum(y[..., None, :] * j.d1, -1)  # (..., 2)

    def D(v, yv):
        return r2 * iq * (v - 2.0 * yv[..., None] * iq * y)

    d1 = np.stack([D(j.d1[..., a, :], yu[..., a]) for a in (0, 1)], -2)
    d2 = np.empty(j.d2.shape)
    for k, (a, b) in enumerate(_PAIRS):
        u, v = j.d1[..., a, :], j.d1[..., b, :]
        ya, yb = yu[..., a][..., None], yu[..., b][..., None]
        uv = np.sum(u * v, -1)[..., None]
        hess = r2 * iq * iq * (-2.0 * (ya * v + yb * u + uv * y) + 8.0 * ya * yb * iq * y)
        w = j.d2[..., k, :]
        d2[..., k, :] = hess + D(w, np.sum(y * w, -1))
    return Jet2(j.point, center + r2 * iq * y, d1, d2)


def inversion_derivatives(x, center, radius):
    """Value, Jacobian and second derivatives of x ↦ c + r²(x−c)/|x−c|²."""
    y = np.asarray(x, dtype=float) - center
    q = np.einsum("...i,...i->...", y, y)
    if np.any(q == 0.0):
        raise SingularAmbientPoint("point coincides with the inversion center")
    r2 = radius * radius
    n = y.shape[-1]
    eye = np.eye(n)
    iq = 1.0 / q
    F = center + r2 * y * iq[..., None]
    yy = y[..., :, None] * y[..., None, :]
    DF = r2 * (eye * iq[..., None, None] - 2.0 * yy * (iq * iq)[..., None, None])
    iq2 = (iq * iq)[..., None, None, None]
    D2F = r2 * (
        -2.0 * (eye[:, :, None] * y[..., None, None, :]
                + eye[:, None, :] * y[..., None, :, None]
                + eye[None, :, :] * y[..., :, None, None]) * iq2
        + 8.0 * yy[..., :, :, None] * y[..., None, None, :] * (iq2 * iq[..., None, None, None])
    )
    return F, DF, D2F


def inverse_conjugate_jet(points):
    """Planar jet of w ↦ 1/w̄ (the unit-circle inversion of R^2) at ``points``."""
    p = np.asarray(points, dtype=float)
    F, DF, D2F = inversion_derivatives(p, np.zeros(2), 1.0)
    # DF[m, n] = ∂_n F^m ; Jet2 stores d1[a, m] = ∂_a F^m
    d1 = np.swapaxes(DF, -1, -2)
    d2 = np.stack([D2F[..., :, a, b] for a, b in _PAIRS], axis=-2)
    return Jet2(p, F, d1, d2)


def reparam_inverse_conjugate(evaluate, points):
    """Evaluate a chart at 1/w̄ and pull the jet back to w."""
    phi = inverse_conjugate_jet(points)
    return reparam_jet(evaluate(phi.value), phi)
