"""Minimal immersions from Weierstrass data (g, η) given as rational expressions.

The immersion is f(z) = Re ∫_b^z (Φ₁, Φ₂, Φ₃) with

    Φ₁ = ½(1 − g²)η,   Φ₂ = (i/2)(1 + g²)η,   Φ₃ = gη,

integrated along the canonical path: first the arc of |z| = |b| from the
basepoint's angle to arg z, then the ray at angle arg z.  Only values are
integrated; first and second derivatives come in closed form from Φ and Φ′.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import DivisionByZeroAtPole, PathThroughPole, PeriodObstruction
from .expr import ComplexExpr, parse_expression
from .jets import ComplexJet2, holomorphic_to_real_jet

log = logging.getLogger(__name__)

PERIOD_TOL = 1e-9
GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
MAX_PANELS = 1 << 12

INVOLUTIONS = {
    "minus-inv-conj": lambda z: -1.0 / np.conj(z),
    "identity": lambda z: z,
}


@dataclass(frozen=True)
class WeierstrassData:
    g: ComplexExpr
    eta_coeff: ComplexExpr
    punctures: tuple = (0j,)
    basepoint: complex = 1.0 + 0j
    involution: str | None = None

    @classmethod
    def from_strings(cls, g, eta, punctures=(0j,), basepoint=1.0, involution=None):
        if involution is not None and involution not in INVOLUTIONS:
            raise ValueError(f"unknown involution {involution!r}")
        return cls(parse_expression(g), parse_expression(eta), tuple(complex(p) for p in punctures),
                   complex(basepoint), involution)


def weierstrass_forms(d):
    """The three holomorphic forms as expression trees (coefficients of dz)."""
    g, eta = d.g, d.eta_coeff
    phi1 = 0.5 * (1 - g * g) * eta
    phi2 = 0.5j * (1 + g * g) * eta
    phi3 = g * eta
    return phi1, phi2, phi3


def _forms_values(d, z):
    """(..., 3) values of Φ at z, sharing one evaluation of g and η."""
    g = d.g.evaluate(z)
    eta = d.eta_coeff.evaluate(z)
    g2 = g * g
    return np.stack([0.5 * (1 - g2) * eta, 0.5j * (1 + g2) * eta, g * eta], axis=-1)


def _forms_jet(d, z):
    g = d.g.jet(z)
    eta = d.eta_coeff.jet(z)
    g2 = g * g
    return (0.5 * (1 - g2) * eta).stack(0.5j * (1 + g2) * eta, g * eta)


def period_check(phi, puncture=0j, radius=1.0, mode="complex", tol=PERIOD_TOL):
    """Loop integral ∮ Φ dz on the circle |z − puncture| = radius.

    ``mode="complex"`` requires the whole period to vanish, i.e. Φ must have a
    single-valued primitive; ``mode="real"`` only requires |Re ∮Φ| ≤ tol,
    which is what makes Re ∫Φ single-valued.  Either failure raises
    PeriodObstruction.
    """
    evaluate = phi.evaluate if isinstance(phi, ComplexExpr) else phi
    prev = None
    for n in (64, 128, 256, 512, 1024, 2048):
        e = np.exp(2j * np.pi * np.arange(n) / n)
        # periodic trapezoid rule: spectrally accurate for analytic integrands
        val = np.mean(np.asarray(evaluate(puncture + radius * e)) * (2j * np.pi * radius * e))
        if prev is not None and abs(val - prev) <= 1e-14 * max(1.0, abs(val)):
            break
        prev = val
    bad = abs(val.real) if mode == "real" else abs(val)
    if bad > tol:
        raise PeriodObstruction(f"nonzero period {val:.6g} around {puncture}", period=val)
    return complex(val)


def _composite_gl(n_panels):
    """Nodes and weights of n-panel composite Gauss–Legendre on [0, 1]."""
    h = 1.0 / n_panels
    left = h * np.arange(n_panels)[:, None]
    u = (left + 0.5 * h * (GL_NODES + 1.0)).ravel()
    w = np.tile(0.5 * h * GL_WEIGHTS, n_panels)
    return u, w


class _Integrator:
    """Adaptive segment integrals of Φ along arcs and rays."""

    def __init__(self, d, tol):
        self.d = d
        self.tol = tol
        self.evaluations = 0

    def _adaptive(self, integrand, lengths, n0=1):
        """``integrand(idx, u)`` returns (len(idx), len(u), 3) samples on [0, 1].

        Segments of zero length contribute nothing and are never sampled.
        """
        count = len(lengths)
        out = np.zeros((count, 3), dtype=complex)
        idx = np.flatnonzero(np.asarray(lengths) != 0)
        n = n0

        def rule(idx, n):
            u, w = _composite_gl(n)
            self.evaluations += len(idx) * len(u)
            return np.einsum("pum,u->pm", integrand(idx, u), w)

        prev = rule(idx, n)
        while idx.size:
            n *= 2
            if n > MAX_PANELS:
                raise PathThroughPole("path integral does not converge; the canonical path meets a pole")
            cur = rule(idx, n)
            scale = np.maximum(1.0, np.max(np.abs(cur), axis=-1))
            ok = np.max(np.abs(cur - prev), axis=-1) <= 0.1 * self.tol * scale
            out[idx[ok]] = cur[ok]
            idx, prev = idx[~ok], cur[~ok]
        return out

    def _phi(self, z):
        try:
            v = _forms_values(self.d, z)
        except DivisionByZeroAtPole as exc:
            raise PathThroughPole(f"canonical path passes through a pole: {exc}") from None
        if not np.all(np.isfinite(v)):
            raise PathThroughPole("canonical path passes through a pole")
        return v

    def arc(self, rb, beta, dtheta):
        """∫ Φ dz along |z| = rb from angle beta to beta + dtheta."""

        def integrand(idx, u):
            t = beta + dtheta[idx, None] * u[None, :]
            z = rb * np.exp(1j * t)
            return self._phi(z) * (1j * z * dtheta[idx, None])[..., None]

        return self._adaptive(integrand, dtheta)

    def ray(self, theta, s0, s1):
        """∫ Φ dz along the ray at angle theta, log-radius from s0 to s1."""
        ds = s1 - s0

        def integrand(idx, u):
            s = s0[idx, None] + ds[idx, None] * u[None, :]
            z = np.exp(s + 1j * theta[idx, None])
            return self._phi(z) * (z * ds[idx, None])[..., None]

        return self._adaptive(integrand, ds)


def path_integral(d, z, tol=1e-12, order="arc-first"):
    """Complex primitive F(z) = ∫_b^z Φ along the canonical path.

    Points sharing an angle are chained along their common ray so each ray
    is integrated once, piece by piece (the per-ray cache).  ``order`` may be
    ``"ray-first"`` to integrate radially at the basepoint's angle before
    the arc, which gives an independent path for consistency checks.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    b = complex(d.basepoint)
    rb, beta = abs(b), np.angle(b)
    r = np.abs(z)
    if np.any(r == 0.0):
        raise DivisionByZeroAtPole("evaluation at the puncture")
    integ = _Integrator(d, tol)
    theta = np.angle(z)
    dth = np.angle(np.exp(1j * (theta - beta)))
    if order == "ray-first":
        # radial at the basepoint angle to radius |z|, then the arc at radius |z|
        F = integ.ray(np.full(z.size, beta), np.full(z.size, np.log(rb)), np.log(r))
        out = np.zeros_like(F)
        for i in range(z.size):
            out[i] = F[i] + integ.arc(r[i], beta, dth[i:i + 1])[0]
        return out.reshape(shape + (3,))
    uth, gidx = np.unique(dth, return_inverse=True)
    arc_vals = integ.arc(rb, beta, uth)
    ls = np.log(r) - np.log(rb)
    side = ls >= 0
    order_idx = np.lexsort((np.abs(ls), side, gidx))
    g_s, side_s, ls_s = gidx[order_idx], side[order_idx], ls[order_idx]
    new_run = np.ones(z.size, dtype=bool)
    new_run[1:] = (g_s[1:] != g_s[:-1]) | (side_s[1:] != side_s[:-1])
    prev = np.where(new_run, 0.0, np.roll(ls_s, 1))
    seg = integ.ray(beta + uth[g_s], prev + np.log(rb), ls_s + np.log(rb))
    c = np.cumsum(seg, axis=0)
    run_id = np.cumsum(new_run) - 1
    offsets = (c - seg)[new_run]
    chained = c - offsets[run_id]
    F = np.empty_like(chained)
    F[order_idx] = chained + arc_vals[g_s]
    return F.reshape(shape + (3,))


def weierstrass_immersion(d, tol=1e-12, check_periods=True, name="weierstrass"):
    """ParametrizedSurface f = Re ∫Φ on the plane minus the punctures."""
    from .surfaces import ParametrizedSurface

    forms = weierstrass_forms(d)
    if check_periods:
        for p in d.punctures:
            for phi in forms:
                period_check(phi, p, _safe_radius(d, p), mode="real")
    for p in d.punctures:
        if p != 0:
            raise ValueError("the canonical path supports a single puncture at the origin")
    _check_basepoint(d)

    def chart(points):
        pts = np.asarray(points, dtype=float)
        z = pts[..., 0] + 1j * pts[..., 1]
        F = path_integral(d, z, tol)
        pj = _forms_jet(d, z)
        h = ComplexJet2(pj.z, F, pj.value, pj.d1)
        return holomorphic_to_real_jet(h, "re")

    return ParametrizedSurface(
        name=name,
        charts=(chart,),
        domain="punctured_plane" if d.punctures else "plane",
        ambient_dim=3,
        holomorphic=False,
        params={"g": str(d.g), "eta": str(d.eta_coeff), "basepoint": d.basepoint},
    )


def _check_basepoint(d):
    """Reject a basepoint at a pole of the forms.

    g alone may have removable poles there (Meeks at z = 1), so the forms are
    sampled on two small circles: growth under shrinking signals a real pole.
    """
    b = complex(d.basepoint)
    eps = 1e-5 * max(1.0, abs(b))
    e = np.exp(2j * np.pi * (np.arange(8) + 0.5) / 8)
    try:
        outer = np.max(np.abs(_forms_values(d, b + eps * e)))
        inner = np.max(np.abs(_forms_values(d, b + 0.1 * eps * e)))
    except DivisionByZeroAtPole:
        raise PathThroughPole("basepoint sits on a pole of the forms") from None
    if not np.isfinite(inner) or inner > 5.0 * outer:
        raise PathThroughPole("basepoint sits on a pole of the forms")


def _safe_radius(d, p):
    # half the distance to the basepoint keeps the loop away from it; any
    # radius works when the only singularity inside is the puncture
    return 0.5 * abs(complex(d.basepoint) - p) if abs(complex(d.basepoint) - p) > 0 else 1.0


def involution_check(d, samples=50, seed=0, tol=1e-12):
    """sup ‖f(I z) − f(z) − c‖ over samples, c the least-squares constant offset."""
    if d.involution is None:
        raise ValueError("no involution declared")
    inv = INVOLUTIONS[d.involution]
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(np.log(0.3), np.log(3.0), samples))
    z = r * np.exp(1j * rng.uniform(-np.pi, np.pi, samples))
    f = path_integral(d, z, tol).real
    fi = path_integral(d, inv(z), tol).real
    dev = fi - f
    c = dev.mean(axis=0)
    return float(np.max(np.linalg.norm(dev - c, axis=-1)))


MEEKS_G = "z^2*(z+1)/(z-1)"
MEEKS_ETA = "i*(z-1)^2/z^4"


def meeks_data():
    return WeierstrassData.from_strings(MEEKS_G, MEEKS_ETA, punctures=(0j,), basepoint=1.0,
                                        involution="minus-inv-conj")


def meeks_surface(tol=1e-12):
    """Meeks' minimal Möbius strip on its orientable double cover ℂ∖{0}."""
    from .surfaces import SingularPoint

    S = weierstrass_immersion(meeks_data(), tol, name="meeks")
    ends = (SingularPoint(0, 0j, "end", 3), SingularPoint(0, complex("inf"), "end", 3, at_infinity=True))
    return replace(S, singular_points=ends, double_cover=True, euler_char=1)


def blow_down(S, rho, points, power):
    """ρ^k S(z/ρ) at complex ``points``."""
    w = np.asarray(points, dtype=complex) / rho
    return rho**power * S.jet_at(w).value


def fit_orthogonal(source, target):
    """Orthogonal Q minimizing ‖source Qᵀ − target‖ (Procrustes, reflections allowed)."""
    u, _, vt = np.linalg.svd(target.T @ source)
    return u @ vt


def meeks_triple_plane(z):
    """The model −(i z³/6, 0) as points of R³ = ℂ × ℝ."""
    w = -1j * np.asarray(z, dtype=complex) ** 3 / 6.0
    return np.stack([w.real, w.imag, np.zeros(w.shape)], axis=-1)
