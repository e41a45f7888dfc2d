"""The surface zoo: closed-form parametrized surfaces with declared domains."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ambient import AffineMap, InverseStereographic, MapChain, Stereographic, Veronese, planar_chart
from .jets import ComplexJet2, holomorphic_to_real_jet, reparam_inverse_conjugate

DOMAINS = ("disk", "annulus", "plane", "punctured_plane", "two_chart_sphere")


@dataclass(frozen=True)
class SingularPoint:
    chart: int
    point: complex
    kind: str  # "branch" or "end"
    order: int  # branch order m(p), or end multiplicity
    at_infinity: bool = False


@dataclass(frozen=True)
class ParametrizedSurface:
    """Chart atlas with jet evaluators.

    For ``two_chart_sphere`` both charts are unit disks and chart 1 uses
    the coordinate w with z = 1/w̄.  ``scales`` brackets the parameter radii
    where the geometry has structure; quadrature always resolves that range
    before it starts trusting geometric decay.
    """

    name: str
    charts: tuple
    domain: str
    ambient_dim: int
    radii: tuple = ()
    singular_points: tuple = ()
    holomorphic: bool = False
    euler_char: int | None = None
    double_cover: bool = False
    scales: tuple = (1.0, 1.0)
    params: dict = field(default_factory=dict)

    def jet(self, points, chart=0):
        return self.charts[chart](np.asarray(points, dtype=float))

    def jet_at(self, z, chart=0):
        z = np.asarray(z, dtype=complex)
        return self.jet(np.stack([z.real, z.imag], axis=-1), chart)

    def branch_order_sum(self):
        return sum(sp.order for sp in self.singular_points if sp.kind == "branch")

    @property
    def closed(self):
        return self.domain == "two_chart_sphere"


def poly_jet(z, components):
    """ComplexJet2 of a vector of polynomials; ``components`` is a list of {power: coeff}."""
    z = np.asarray(z, dtype=complex)
    vals, d1s, d2s = [], [], []
    for comp in components:
        v = np.zeros_like(z)
        d1 = np.zeros_like(z)
        d2 = np.zeros_like(z)
        for p, c in comp.items():
            v = v + c * z**p
            if p >= 1:
                d1 = d1 + c * p * z ** (p - 1)
            if p >= 2:
                d2 = d2 + c * p * (p - 1) * z ** (p - 2)
        vals.append(v)
        d1s.append(d1)
        d2s.append(d2)
    return ComplexJet2(z, np.stack(vals, -1), np.stack(d1s, -1), np.stack(d2s, -1))


def poly_chart(components, embedding):
    def evaluate(points):
        p = np.asarray(points, dtype=float)
        return holomorphic_to_real_jet(poly_jet(p[..., 0] + 1j * p[..., 1], components), embedding)

    return evaluate


def _plane_surface(name, components, embedding, ambient_dim, end_mult, holomorphic, extra=(), **params):
    sing = (SingularPoint(0, complex("inf"), "end", end_mult, at_infinity=True),) + tuple(extra)
    return ParametrizedSurface(
        name=name,
        charts=(poly_chart(components, embedding),),
        domain="plane",
        ambient_dim=ambient_dim,
        singular_points=sing,
        holomorphic=holomorphic,
        params=params,
    )


def power_graph(m):
    """f_m(z) = (z^m, z) into C^2 = R^4."""
    if m < 2:
        raise ValueError("power graph needs m >= 2")
    return _plane_surface("chen" if m == 2 else f"power:{m}", [{m: 1.0}, {1: 1.0}], "c2", 4, m, True, m=m)


def chen_graph():
    return power_graph(2)


def rescaled_chen(rho):
    """ρ² f_C(z/ρ) = (z², ρz); ρ = 0 gives the branched plane (z², 0)."""
    if rho == 0:
        return branched_plane(2)
    return _plane_surface(f"rchen:{rho:g}", [{2: 1.0}, {1: rho}], "c2", 4, 2, True, rho=rho)


def branched_plane(m):
    """(z^m, 0) into C^2."""
    extra = (SingularPoint(0, 0j, "branch", m - 1),) if m >= 2 else ()
    return _plane_surface(f"plane:{m}", [{m: 1.0}, {}], "c2", 4, m, True, extra=extra, m=m)


def enneper():
    """f_E = -(1/9)(z^3, 0) + (1/3)(x, -y, x^2 - y^2) in R^3."""
    comps = [{1: 1 / 3, 3: -1 / 9}, {1: 1j / 3, 3: 1j / 9}, {2: 1 / 3}]
    return _plane_surface("enneper", comps, "re", 3, 3, False)


def higher_enneper(m):
    """Re(z - z^{2m+1}/(2m+1), i(z + z^{2m+1}/(2m+1)), 2 z^{m+1}/(m+1))."""
    if m < 1:
        raise ValueError("higher Enneper needs m >= 1")
    k = 2 * m + 1
    comps = [{1: 1.0, k: -1.0 / k}, {1: 1j, k: 1j / k}, {m + 1: 2.0 / (m + 1)}]
    return _plane_surface(f"henneper:{m}", comps, "re", 3, k, False, m=m)


def _sphere_charts(maps_after):
    """Two charts through the unit sphere: p(z) and p(1/w̄) = reflect(p(w))."""
    c1 = planar_chart(MapChain(InverseStereographic(), *maps_after))
    c2 = planar_chart(MapChain(InverseStereographic(), AffineMap(np.diag([1.0, 1.0, -1.0])), *maps_after))
    return c1, c2


def round_sphere(r=1.0):
    c1, c2 = _sphere_charts([AffineMap(r * np.eye(3))])
    return ParametrizedSurface(
        name=f"sphere:{r:g}", charts=(c1, c2), domain="two_chart_sphere", ambient_dim=3,
        euler_char=2, params={"r": r},
    )


VERONESE_RADIUS = 1.0 / 3.0


def veronese_stereographic():
    """Stereographic image in R^4 of the Veronese surface, on its S^2 double cover."""
    c1, c2 = _sphere_charts([Veronese(), Stereographic(VERONESE_RADIUS)])
    return ParametrizedSurface(
        name="veronese", charts=(c1, c2), domain="two_chart_sphere", ambient_dim=4,
        euler_char=1, double_cover=True,
    )


def meeks():
    from .weierstrass import meeks_surface

    return meeks_surface()


def two_chart_from_plane(evaluate):
    return evaluate, (lambda p: reparam_inverse_conjugate(evaluate, p))


@lru_cache(maxsize=8)
def halton_disk(n=4096, radius=1.0):
    """Deterministic Halton points in a disk, skipping the center."""
    from scipy.stats import qmc

    u = qmc.Halton(d=2, scramble=False).random(n + 1)[1:]
    r = radius * np.sqrt(u[:, 0])
    t = 2 * np.pi * u[:, 1]
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


def sample_surface_points(S, n=4096):
    """Image points of S at a deterministic Halton sample of its parameter domain."""
    if S.domain in ("disk", "annulus"):
        R = S.radii[-1]
        p = halton_disk(n, R)
        if S.domain == "annulus":
            p = p[np.hypot(p[:, 0], p[:, 1]) >= S.radii[0]]
        return S.jet(p).value
    d = halton_disk(n)
    # extra disks down to below the smallest feature, so small glued-in
    # copies near a chart origin are not missed
    lo = min(S.scales) if S.scales else 1.0
    r, extra = 0.5, []
    while r > lo / 8 and len(extra) < 40:
        extra.append(halton_disk(256, r))
        r *= 0.5
    d = np.concatenate([d] + extra)
    if S.domain == "two_chart_sphere":
        return np.concatenate([S.jet(d, 0).value, S.jet(d, 1).value])
    # plane-like: unit disk plus its image under z = 1/w̄ (skip near-infinite points)
    outer = d[np.hypot(d[:, 0], d[:, 1]) > 1e-3]
    outer = outer / np.sum(outer**2, axis=-1, keepdims=True)
    return np.concatenate([S.jet(d).value, S.jet(outer).value])


def parse_surface_id(text):
    """Zoo identifiers: chen, rchen:ρ, power:m, plane:m, enneper, henneper:m, veronese, sphere:r, meeks."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "chen":
        return chen_graph()
    if name == "power":
        return power_graph(int(arg))
    if name == "rchen":
        return rescaled_chen(float(arg))
    if name == "plane":
        return branched_plane(int(arg))
    if name == "enneper":
        return enneper()
    if name == "henneper":
        return higher_enneper(int(arg))
    if name == "veronese":
        return veronese_stereographic()
    if name == "sphere":
        return round_sphere(float(arg) if arg else 1.0)
    if name == "meeks":
        return meeks()
    from .glue import parse_construction_id

    return parse_construction_id(text)
