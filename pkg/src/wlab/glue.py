"""Cutoff functions and the glueing constructions.

A glued surface h_ρ = P + φ̂·L is a branched plane P(z) = c·z^k that
contains, inside |z| ≤ 1/2, a rescaled copy of a minimal model surface
(P + L equals that copy exactly there).  Two copies are joined into a
closed sphere by inverting one of them, then the result is scaled and
inverted once more so that everything stays bounded.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import TransitionTooCoarse
from .jets import Jet2, holomorphic_to_real_jet, push_jet_ambient
from .mobius import Dilate, Invert, InversionPair, MobiusMap, select_inversion_center, transform_surface
from .surfaces import ParametrizedSurface, SingularPoint, poly_jet

log = logging.getLogger(__name__)

RHO_MAX = 0.25


def smoothstep9(t, nu=0):
    """Degree-9 smoothstep S with S(0)=0, S(1)=1 and four vanishing derivatives at both ends."""
    t = np.clip(t, 0.0, 1.0)
    if nu == 0:
        return t**5 * (126 - 420 * t + 540 * t**2 - 315 * t**3 + 70 * t**4)
    if nu == 1:
        return 630 * t**4 * (1 - t) ** 4
    if nu == 2:
        return 2520 * t**3 * (1 - t) ** 3 * (1 - 2 * t)
    raise ValueError("only derivatives up to order 2 are provided")


@dataclass(frozen=True)
class Cutoff:
    """Radial profile φ̂ = 1 on r ≤ inner, 0 on r ≥ outer, C⁴ in between."""

    inner: float = 0.5
    outer: float = 1.0

    def profile(self, r, nu=0):
        w = self.outer - self.inner
        t = (np.asarray(r, dtype=float) - self.inner) / w
        if nu == 0:
            return 1.0 - smoothstep9(t)
        return -smoothstep9(t, nu) / w**nu

    def scalar_jet(self, points):
        """Jet of φ(z) = φ̂(|z|) as a Jet2 with one ambient coordinate."""
        p = np.asarray(points, dtype=float)
        r = np.hypot(p[..., 0], p[..., 1])
        v = self.profile(r)
        f1 = self.profile(r, 1)
        f2 = self.profile(r, 2)
        rs = np.where(r > 0, r, 1.0)
        u = p / rs[..., None]
        d1 = f1[..., None] * u
        # ∂_ab φ̂(r) = φ̂'' u_a u_b + φ̂' (δ_ab − u_a u_b)/r
        uu = np.stack([u[..., 0] ** 2, u[..., 0] * u[..., 1], u[..., 1] ** 2], axis=-1)
        delta = np.array([1.0, 0.0, 1.0])
        d2 = f2[..., None] * uu + (f1 / rs)[..., None] * (delta - uu)
        flat = r <= self.inner
        d1 = np.where(flat[..., None], 0.0, d1)
        d2 = np.where(flat[..., None], 0.0, d2)
        return Jet2(p, v[..., None], d1[..., None], d2[..., None])

    def vector_jet(self, points):
        """Jet of φ(z) = z·φ̂(|z|) as a map into R²."""
        p = np.asarray(points, dtype=float)
        ident = Jet2(p, p.copy(), np.broadcast_to(np.eye(2), p.shape[:-1] + (2, 2)).copy(),
                     np.zeros(p.shape[:-1] + (3, 2)))
        return self.scalar_jet(p) * ident

    def __call__(self, z):
        return self.profile(np.abs(np.asarray(z)))


CUTOFF = Cutoff()


@dataclass(frozen=True)
class Family:
    """Polynomial data of a glue family: h_ρ = P + φ̂·L_ρ."""

    name: str
    k: int  # power of the branched plane
    c: complex  # P = c·z^k in the first complex pair of coordinates
    plane: tuple  # component dicts of P
    embedding: str
    ambient_dim: int
    m: int = 0

    def inner(self, rho):
        """Component dicts of L_ρ."""
        if self.name == "chen":
            # ρ^m f_m(z/ρ) = (z^m, ρ^{m-1} z)
            return ({}, {1: rho ** (self.m - 1)})
        if self.name == "enneper":
            return ({1: rho**2 / 3}, {1: 1j * rho**2 / 3}, {2: rho / 3})
        m, k = self.m, self.k
        return ({1: rho ** (k - 1)}, {1: 1j * rho ** (k - 1)}, {m + 1: 2 * rho**m / (m + 1)})

    def feature_scale(self, rho):
        return rho

    @property
    def label(self):
        return self.name if self.name == "enneper" else f"{self.name}:{self.m}"


def family(name, m=None):
    """Glue family by name: ``chen`` (m ≥ 2), ``enneper``, ``henneper`` (m ≥ 1)."""
    name = name.lower()
    if name == "chen":
        m = 2 if m is None else int(m)
        if m < 2:
            raise ValueError("chen family needs m >= 2")
        return Family("chen", m, 1.0, ({m: 1.0}, {}), "c2", 4, m)
    if name == "enneper":
        return Family("enneper", 3, -1 / 9, ({3: -1 / 9}, {3: 1j / 9}, {}), "re", 3, 1)
    if name in ("henneper", "higher_enneper"):
        m = 1 if m is None else int(m)
        if m < 1:
            raise ValueError("higher Enneper family needs m >= 1")
        k = 2 * m + 1
        return Family("henneper", k, -1.0 / k, ({k: -1.0 / k}, {k: 1j / k}, {}), "re", 3, m)
    raise ValueError(f"unknown glue family {name!r}")


@dataclass(frozen=True)
class GlueSpec:
    family: Family
    rho: float
    delta: float | None = None
    inversion_center: np.ndarray | None = None
    radius: float = 1.0

    def __post_init__(self):
        if not 0 < self.rho <= RHO_MAX:
            raise ValueError(f"glue scale must satisfy 0 < rho <= {RHO_MAX}")


def _glue_chart(fam, rho, cutoff=CUTOFF):
    plane = fam.plane
    inner = fam.inner(rho)

    def chart(points):
        p = np.asarray(points, dtype=float)
        z = p[..., 0] + 1j * p[..., 1]
        P = holomorphic_to_real_jet(poly_jet(z, plane), fam.embedding)
        L = holomorphic_to_real_jet(poly_jet(z, inner), fam.embedding)
        return P + cutoff.scalar_jet(p) * L

    return chart


def model_glue(fam, rho):
    """The open surface h_ρ: branched plane with a rescaled model copy inside |z| ≤ 1/2."""
    if isinstance(fam, str):
        fam = family(fam)
    GlueSpec(fam, rho)
    return ParametrizedSurface(
        name=f"{fam.label}-model",
        charts=(_glue_chart(fam, rho),),
        domain="plane",
        ambient_dim=fam.ambient_dim,
        singular_points=(SingularPoint(0, complex("inf"), "end", fam.k, at_infinity=True),),
        scales=(fam.feature_scale(rho), 1.0),
        params={"family": fam.label, "rho": rho},
    )


def _unit_inversion(n):
    return MobiusMap([Invert(np.zeros(n), 1.0)])


def invert_and_flip(S):
    """h̃(w) = I(h(1/w̄)) with I the unit inversion at the origin, on the whole w-plane.

    The end of h at ∞ becomes a branch point at w = 0 and the copy near
    h(0) = 0 becomes an end at w = ∞.  Applying the map twice gives back h.
    """
    from .jets import reparam_inverse_conjugate

    base = S.charts[0]
    inv = _unit_inversion(S.ambient_dim)

    def chart(points):
        return push_jet_ambient(reparam_inverse_conjugate(base, points), inv)

    k = next((sp.order for sp in S.singular_points if sp.kind == "end" and sp.at_infinity), 1)
    sing = (SingularPoint(0, 0j, "branch", k - 1),) if k >= 2 else ()
    lo, hi = S.scales
    return ParametrizedSurface(
        name=f"flip({S.name})",
        charts=(chart,),
        domain="plane",
        ambient_dim=S.ambient_dim,
        singular_points=sing + (SingularPoint(0, complex("inf"), "end", 1, at_infinity=True),),
        scales=(1.0 / hi, 1.0 / lo),
        params=dict(S.params, flipped=True),
    )


def _bar(fam, rho):
    """h̄_ρ on a two-chart sphere: chart 0 carries s·h_ρ, chart 1 carries I∘h_ρ.

    With s = 1/|c|² the two pieces agree on the unit circle, where both
    equal the branched plane z^k/c̄ to fourth order.
    """
    h = _glue_chart(fam, rho)
    s = 1.0 / abs(fam.c) ** 2
    inv = _unit_inversion(fam.ambient_dim)
    outer = lambda p: h(p) * s  # noqa: E731
    inner = lambda p: push_jet_ambient(h(p), inv)  # noqa: E731
    return ParametrizedSurface(
        name=f"{fam.label}-bar",
        charts=(outer, inner),
        domain="two_chart_sphere",
        ambient_dim=fam.ambient_dim,
        singular_points=(SingularPoint(1, 0j, "end", 1),),
        scales=(fam.feature_scale(rho), 1.0),
        params={"family": fam.label, "rho": rho, "scale": s},
    )


def glue_bar(fam, rho):
    """The intermediate surface h̄_ρ (one end, at the chart-1 origin)."""
    if isinstance(fam, str):
        fam = family(fam)
    GlueSpec(fam, rho)
    return _bar(fam, rho)


def double_glue(fam, rho, radius=1.0):
    """Closed sphere ĥ_ρ = I_{x0}(ρ^{-k} h̄_ρ) with x0 from the axis search."""
    if isinstance(fam, str):
        fam = family(fam)
    GlueSpec(fam, rho, radius=radius)
    bar = _bar(fam, rho)
    dil = MobiusMap([Dilate(rho ** (-fam.k))])
    scaled = transform_surface(dil, bar)
    x0 = select_inversion_center(scaled, radius)
    outer = MobiusMap([Dilate(rho ** (-fam.k)), Invert(x0, radius)])
    # chart 1 is I_{x0} ∘ D ∘ I_0 ∘ h_ρ; fusing the two inversions keeps the
    # jets accurate where h_ρ is tiny
    inner = InversionPair(x0, radius, rho ** (-fam.k / 2))
    h = _glue_chart(fam, rho)
    s = bar.params["scale"]
    charts = (lambda p: push_jet_ambient(h(p) * s, outer), lambda p: push_jet_ambient(h(p), inner))
    return replace(
        bar,
        name=f"{fam.label}-glue",
        charts=charts,
        singular_points=(),
        euler_char=2,
        holomorphic=False,
        params={"family": fam.label, "rho": rho, "x0": x0.tolist(), "radius": radius},
    )


# ---------------------------------------------------------------- Meeks / Boy


def inverted_meeks(radius=1.0):
    """Closed branched RP² (on its S² double cover): Meeks' surface inverted at an axis point."""
    from .weierstrass import meeks_surface

    S = meeks_surface()
    x0 = select_inversion_center(S, radius)
    T = transform_surface(MobiusMap([Invert(x0, radius)]), S)
    return replace(T, name="inverted-meeks", params={"x0": x0.tolist(), "radius": radius})


def _triple_plane_fit(f, delta, center, n=256):
    """Least-squares L with f ≈ center + L·(Re z³, Im z³) on the annulus δ ≤ |z| ≤ 2δ.

    The translation is pinned to the branch value so the Enneper copy is
    centered on the branch point itself.
    """
    t = 2 * np.pi * (np.arange(n) + 0.5) / n
    radii = delta * np.array([1.0, 1.25, 1.5, 1.75, 2.0])
    z = (radii[:, None] * np.exp(1j * t)[None, :]).ravel()
    vals = f(np.stack([z.real, z.imag], -1)).value - center
    z3 = z**3
    X = np.stack([z3.real, z3.imag], -1)
    coef, *_ = np.linalg.lstsq(X, vals, rcond=None)
    resid = vals - X @ coef
    return coef.T, float(np.max(np.linalg.norm(resid, axis=-1)))


@dataclass
class TransitionReport:
    delta: float
    rho: float
    scale: float  # λ, the fitted triple-plane size
    fit_residual: float  # sup |f_m − fitted plane| on δ ≤ |z| ≤ 2δ
    relative_residual: float  # fit_residual / (λ (2δ)³)
    conformality_defect: float  # spread of L's singular values relative to λ
    blend_deviation: float  # sup |E − f_m| on the transition annulus
    energy_effect: float = float("nan")  # |Δ∫|A|²| caused by the blend on the annulus
    frame: list = field(default_factory=list)

    def to_dict(self):
        return dict(self.__dict__)


def _blend_chart(fm_chart, E_chart, delta):
    cut = Cutoff(delta, 2 * delta)

    def chart(points):
        p = np.asarray(points, dtype=float)
        flat = p.reshape(-1, 2)
        r = np.hypot(flat[:, 0], flat[:, 1])
        inner = r < 2 * delta
        outer = r > delta
        n = 3
        v = np.empty((len(flat), n))
        d1 = np.empty((len(flat), 2, n))
        d2 = np.empty((len(flat), 3, n))
        only_m = ~inner
        only_e = ~outer
        mix = inner & outer
        if only_m.any():
            j = fm_chart(flat[only_m])
            v[only_m], d1[only_m], d2[only_m] = j.value, j.d1, j.d2
        if only_e.any():
            j = E_chart(flat[only_e])
            v[only_e], d1[only_e], d2[only_e] = j.value, j.d1, j.d2
        if mix.any():
            q = flat[mix]
            jm = fm_chart(q)
            je = E_chart(q)
            j = jm + cut.scalar_jet(q) * (je - jm)
            v[mix], d1[mix], d2[mix] = j.value, j.d1, j.d2
        shape = p.shape[:-1]
        return Jet2(p, v.reshape(shape + (n,)), d1.reshape(shape + (2, n)), d2.reshape(shape + (3, n)))

    return chart


def _annulus_effect(before, after, delta, tol=1e-6):
    """|∫|A|² dμ| difference between two charts on δ ≤ |z| ≤ 2δ."""
    from .geometry import densities
    from .quad import _annulus_cells, _Pool, adaptive_cells

    def f(p):
        return densities(after(p), ("a2",)) - densities(before(p), ("a2",))

    value, _, _, _ = adaptive_cells(f, _annulus_cells(delta, 2 * delta), tol, pool=_Pool())
    return float(abs(value[0]))


def meeks_boy_glue(rho, delta, budget=1.5, base=None):
    """Enneper copies glued into both branch points of the inverted Meeks double cover.

    The branch point sits at the chart-0 origin; chart 1 is chart 0
    composed with w ↦ −w, which is how the involution I(z) = −1/z̄ reads in
    the second chart.  Returns (surface, TransitionReport).  Raises
    TransitionTooCoarse when the triple-plane fit residual on δ ≤ |z| ≤ 2δ,
    relative to the fitted plane's size λ(2δ)³, exceeds ``budget``.
    """
    if not 0 < rho <= delta / 4:
        raise ValueError("meeks_boy_glue needs 0 < rho <= delta/4")
    if not 0 < delta <= 0.5:
        raise ValueError("transition radius must lie in (0, 1/2]")
    fm = base if base is not None else inverted_meeks()
    fm_chart = fm.charts[0]
    # the Meeks end at z = 0 is mapped to the inversion center
    a = np.asarray(fm.params["x0"], dtype=float)
    L, resid = _triple_plane_fit(fm_chart, delta, a)
    U, sv, Vt = np.linalg.svd(L, full_matrices=False)
    frame2 = U @ Vt  # nearest matrix with orthonormal columns
    lam = float(sv.mean())
    u1, u2 = frame2[:, 0], frame2[:, 1]
    Q = np.stack([-u1, -u2, np.cross(u1, u2)], axis=-1)
    rel = resid / (lam * (2 * delta) ** 3)
    from .surfaces import enneper

    fe = enneper().charts[0]

    def E_chart(points):
        j = fe(np.asarray(points, dtype=float) / rho)
        # ρ³ f_E(z/ρ): first derivatives pick up ρ², second derivatives ρ
        s = 9.0 * lam
        return Jet2(j.point * rho, a + s * rho**3 * j.value @ Q.T, s * rho**2 * j.d1 @ Q.T,
                    s * rho * j.d2 @ Q.T)

    # half-step angles keep the samples off z = ±1, where the Gauss map has poles
    q = np.exp(2j * np.pi * (np.arange(64) + 0.5) / 64)
    zs = (delta * np.array([1.0, 1.5, 2.0])[:, None] * q).ravel()
    ps = np.stack([zs.real, zs.imag], -1)
    dev = float(np.max(np.linalg.norm(E_chart(ps).value - fm_chart(ps).value, axis=-1)))
    report = TransitionReport(delta, rho, lam, resid, rel, float(np.ptp(sv) / lam), dev, frame=Q.tolist())
    if rel > budget:
        log.info("meeks-boy transition: %s", report)
        raise TransitionTooCoarse(
            f"triple-plane fit residual {rel:.3g} (relative) exceeds budget {budget:.3g} at delta={delta}"
        )
    c0 = _blend_chart(fm_chart, E_chart, delta)
    report.energy_effect = _annulus_effect(fm_chart, c0, delta)
    log.info("meeks-boy transition: %s", report)

    def c1(points):
        p = np.asarray(points, dtype=float)
        j = c0(-p)
        # w ↦ −w flips first derivatives and keeps second derivatives
        return Jet2(p, j.value, -j.d1, j.d2)

    S = ParametrizedSurface(
        name="meeks-boy",
        charts=(c0, c1),
        domain="two_chart_sphere",
        ambient_dim=3,
        euler_char=1,
        double_cover=True,
        scales=(rho, 1.0),
        params={"rho": rho, "delta": delta, "transition": report.to_dict()},
    )
    return S, report


def parse_construction_id(text):
    """Construction identifiers.

    ``chen-glue:m=2,rho=0.1``, ``enneper-glue:rho=0.1``, ``henneper-glue:m=1,rho=0.1``
    (closed spheres); the same with ``-model`` (h_ρ) or ``-bar`` (h̄_ρ);
    ``inverted:<zoo id>``; ``inverted-meeks``; ``meeks-boy:delta=0.1,rho=0.01``.
    """
    from .surfaces import parse_surface_id

    head, _, rest = text.partition(":")
    head = head.strip().lower()
    if head == "inverted":
        S = parse_surface_id(rest)
        x0 = select_inversion_center(S)
        T = transform_surface(MobiusMap([Invert(x0, 1.0)]), S)
        return replace(T, name=f"inverted:{S.name}", params=dict(S.params, x0=x0.tolist()))
    if head == "inverted-meeks":
        return inverted_meeks()
    opts = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"expected key=value in {text!r}")
        opts[key.strip()] = float(val)
    if head == "meeks-boy":
        rho = opts.get("rho", 0.01)
        delta = opts.get("delta", float(np.sqrt(rho)))
        return meeks_boy_glue(rho, delta)[0]
    fam_name, _, kind = head.partition("-")
    if kind not in ("glue", "model", "bar"):
        raise ValueError(f"unknown surface or construction {text!r}")
    fam = family(fam_name, int(opts["m"]) if "m" in opts else None)
    rho = opts.get("rho", 0.1)
    if kind == "glue":
        return double_glue(fam, rho)
    if kind == "model":
        return model_glue(fam, rho)
    return glue_bar(fam, rho)
