"""Möbius transformations of R^n ∪ {∞} and conformal-invariance instrumentation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .ambient import MapChain
from .errors import CenterOnSurface, HitsCenter, SingularAmbientPoint
from .jets import inversion_derivatives, push_jet_ambient, push_jet_inversion, push_jet_linear

log = logging.getLogger(__name__)

DELTA_SAFE = 1e-6


@dataclass(frozen=True)
class Translate:
    v: np.ndarray

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        return (x + self.v, np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)),
                np.zeros(x.shape[:-1] + (n, n, n)))

    def push(self, j):
        return push_jet_linear(j, np.eye(j.value.shape[-1]), np.asarray(self.v, dtype=float))

    def inverse(self):
        return Translate(-np.asarray(self.v))

    def image_of_infinity(self, p):
        return p


@dataclass(frozen=True)
class Dilate:
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("dilation factor must be positive")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        return (self.lam * x, np.broadcast_to(self.lam * np.eye(n), x.shape[:-1] + (n, n)),
                np.zeros(x.shape[:-1] + (n, n, n)))

    def push(self, j):
        return push_jet_linear(j, self.lam * np.eye(j.value.shape[-1]))

    def inverse(self):
        return Dilate(1.0 / self.lam)

    def image_of_infinity(self, p):
        return p


@dataclass(frozen=True)
class Orthogonal:
    O: np.ndarray

    def __post_init__(self):
        O = np.asarray(self.O, dtype=float)
        if np.max(np.abs(O.T @ O - np.eye(O.shape[0]))) > 1e-12:
            raise ValueError("matrix is not orthogonal to 1e-12")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        O = np.asarray(self.O)
        return x @ O.T, np.broadcast_to(O, x.shape[:-1] + (n, n)), np.zeros(x.shape[:-1] + (n, n, n))

    def push(self, j):
        return push_jet_linear(j, np.asarray(self.O, dtype=float))

    def inverse(self):
        return Orthogonal(np.asarray(self.O).T.copy())

    def image_of_infinity(self, p):
        return p


@dataclass(frozen=True)
class Invert:
    """x ↦ x0 + r^2 (x - x0)/|x - x0|^2."""

    center: np.ndarray
    radius: float = 1.0

    def evaluate(self, x):
        try:
            return inversion_derivatives(x, np.asarray(self.center, dtype=float), self.radius)
        except SingularAmbientPoint as exc:
            raise HitsCenter(str(exc)) from None

    def push(self, j):
        try:
            return push_jet_inversion(j, np.asarray(self.center, dtype=float), self.radius)
        except SingularAmbientPoint as exc:
            raise HitsCenter(str(exc)) from None

    def inverse(self):
        return self

    def image_of_infinity(self, p):
        # None encodes the point at infinity
        if p is None:
            return np.asarray(self.center, dtype=float)
        if np.allclose(p, self.center, rtol=0, atol=0):
            return None
        return self.evaluate(np.asarray(p, dtype=float))[0]


@dataclass(frozen=True)
class InversionPair:
    """I_{a,s} ∘ I_{0,t} written as one map, smooth at the origin.

    Composing the two inversions numerically sends points near 0 out to
    infinity and back, which destroys the second derivatives.  The closed
    form a + s²(t²y − a|y|²)/(t⁴ − 2t²a·y + |a|²|y|²) has no such problem.
    """

    center: np.ndarray
    radius: float = 1.0
    inner_radius: float = 1.0

    def evaluate(self, x):
        y = np.asarray(x, dtype=float)
        a = np.asarray(self.center, dtype=float)
        n = y.shape[-1]
        t2, s2 = self.inner_radius**2, self.radius**2
        aa = float(a @ a)
        yy = np.einsum("...i,...i->...", y, y)
        ay = y @ a
        N = t2 * y - a * yy[..., None]
        D = t2 * t2 - 2 * t2 * ay + aa * yy
        if np.any(D == 0.0):
            raise HitsCenter("point is mapped to infinity by the inversion pair")
        eye = np.eye(n)
        DN = t2 * eye - 2 * a[:, None] * y[..., None, :]
        DD = -2 * t2 * a + 2 * aa * y
        Di = 1.0 / D[..., None]
        F = a + s2 * N * Di
        DF = s2 * (DN * Di[..., None] - N[..., :, None] * DD[..., None, :] * (Di**2)[..., None])
        D2N = -2 * a[:, None, None] * eye[None, :, :]
        D2F = s2 * (
            D2N * Di[..., None, None]
            - (DN[..., :, :, None] * DD[..., None, None, :] + DN[..., :, None, :] * DD[..., None, :, None])
            * (Di**2)[..., None, None]
            - 2 * aa * N[..., :, None, None] * eye * (Di**2)[..., None, None]
            + 2 * N[..., :, None, None] * DD[..., None, :, None] * DD[..., None, None, :] * (Di**3)[..., None, None]
        )
        return F, DF, D2F

    def inverse(self):
        return MobiusMap([Invert(np.asarray(self.center), self.radius), Invert(np.zeros(len(self.center)),
                                                                                self.inner_radius)])

    def image_of_infinity(self, p):
        return MobiusMap([Invert(np.zeros(len(self.center)), self.inner_radius),
                          Invert(np.asarray(self.center), self.radius)]).image_of_infinity_from(p)


class MobiusMap:
    """Finite composition of primitives; ``steps[0]`` is applied first."""

    def __init__(self, steps):
        self.steps = tuple(steps)
        self._chain = MapChain(*self.steps) if self.steps else None

    def __repr__(self):
        return f"MobiusMap({list(self.steps)!r})"

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        for s in self.steps:
            x = s.evaluate(x)[0]
        return x

    def evaluate(self, x):
        if self._chain is None:
            x = np.asarray(x, dtype=float)
            n = x.shape[-1]
            return x, np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)), np.zeros(x.shape[:-1] + (n, n, n))
        return self._chain.evaluate(x)

    def derivatives(self, x):
        _, DF, D2F = self.evaluate(x)
        return DF, D2F

    def then(self, other):
        return MobiusMap(self.steps + other.steps)

    def inverse(self):
        return MobiusMap([s.inverse() for s in reversed(self.steps)])

    def image_of_infinity(self):
        return self.image_of_infinity_from(None)

    def image_of_infinity_from(self, p):
        for s in self.steps:
            p = s.image_of_infinity(p)
        return p

    def inversions(self):
        return [s for s in self.steps if isinstance(s, Invert)]


def apply(m, x):
    return m.apply(x)


def derivatives(m, x):
    return m.derivatives(x)


def parse_mobius(text, dim=None):
    """Parse ``"invert:0,0,0,0;r=1|dilate:2|translate:1,0,0,0|orthogonal:<row-major>"``."""
    steps = []
    for part in filter(None, (p.strip() for p in text.split("|"))):
        kind, _, rest = part.partition(":")
        kind = kind.strip().lower()
        if kind == "invert":
            coords, _, opt = rest.partition(";")
            r = 1.0
            if opt:
                key, _, val = opt.partition("=")
                if key.strip() != "r":
                    raise ValueError(f"unknown inversion option {opt!r}")
                r = float(val)
            steps.append(Invert(np.array([float(c) for c in coords.split(",")]), r))
        elif kind == "dilate":
            steps.append(Dilate(float(rest)))
        elif kind == "translate":
            steps.append(Translate(np.array([float(c) for c in rest.split(",")])))
        elif kind == "orthogonal":
            vals = np.array([float(c) for c in rest.split(",")])
            n = int(round(np.sqrt(vals.size)))
            steps.append(Orthogonal(vals.reshape(n, n)))
        else:
            raise ValueError(f"unknown Möbius primitive {kind!r}")
    return MobiusMap(steps)


def random_mobius(rng, dim, points, min_distance=1.0):
    """Random composition whose inversion center keeps ``min_distance`` from ``points``."""
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    O = q * np.sign(np.diag(r))
    # the median keeps far-out samples of an unbounded surface from dominating
    scale = max(1.0, float(np.median(np.linalg.norm(points, axis=-1))))
    for _ in range(200):
        c = rng.normal(size=dim)
        c *= scale * rng.uniform(0.5, 2.0) / np.linalg.norm(c)
        if np.min(np.linalg.norm(points - c, axis=-1)) >= min_distance:
            break
    else:
        c = np.zeros(dim)
        c[0] = 4.0 * scale
    return MobiusMap([
        Invert(c, float(rng.uniform(0.5, 2.0))),
        Orthogonal(O),
        Dilate(float(rng.uniform(0.5, 2.0))),
        Translate(rng.normal(size=dim)),
    ])


def _check_centers(m, pts):
    x = np.asarray(pts, dtype=float)
    for s in m.steps:
        if isinstance(s, Invert):
            d = np.min(np.linalg.norm(x - s.center, axis=-1))
            if d < DELTA_SAFE:
                raise CenterOnSurface(f"inversion center within {d:.3g} of the surface")
        x = s.evaluate(x)[0]


def _chart_origins(S):
    """Images of the chart origins; the Halton samples never include them."""
    from .errors import WlabError

    pts = []
    for chart in S.charts:
        try:
            v = chart(np.zeros((1, 2))).value
        except (WlabError, ZeroDivisionError, FloatingPointError):
            continue
        if np.all(np.isfinite(v)):
            pts.append(v)
    return np.concatenate(pts) if pts else np.zeros((0, S.ambient_dim))


def transform_surface(m, S):
    """Image surface m∘S; ends mapped to finite points become branch points."""
    from .surfaces import ParametrizedSurface, SingularPoint, sample_surface_points

    _check_centers(m, np.concatenate([sample_surface_points(S), _chart_origins(S)]))

    def pushed(chart):
        return lambda p: push_jet_ambient(chart(p), m)

    charts = tuple(pushed(c) for c in S.charts)
    domain = S.domain
    singular = list(S.singular_points)
    euler = S.euler_char
    ends_finite = m.image_of_infinity() is not None
    if S.domain in ("plane", "punctured_plane") and ends_finite:
        from .jets import reparam_inverse_conjugate

        base = S.charts[0]
        chart2 = lambda p: reparam_inverse_conjugate(base, p)  # noqa: E731
        charts = (pushed(base), pushed(chart2))
        domain = "two_chart_sphere"
        new_sing = []
        for sp in singular:
            if sp.kind == "end":
                chart = 1 if sp.at_infinity else 0
                new_sing.append(SingularPoint(chart, 0j, "branch", sp.order - 1))
            else:
                new_sing.append(sp)
        singular = new_sing
        euler = 1 if S.double_cover else 2
    return ParametrizedSurface(
        name=f"mobius({S.name})",
        charts=charts,
        domain=domain,
        ambient_dim=S.ambient_dim,
        radii=S.radii,
        singular_points=tuple(singular),
        holomorphic=False,
        euler_char=euler,
        double_cover=S.double_cover,
        scales=S.scales,
        params=dict(S.params, mobius=repr(m)),
    )


def select_inversion_center(S, radius=1.0, max_doublings=40):
    """First point t·(±e_k), t = 0, 1, 2, 4, ..., whose sampled distance to S is ≥ radius."""
    pts = sample_points_for(S)
    n = S.ambient_dim
    cands = [np.zeros(n)]
    for j in range(max_doublings):
        t = 2.0**j
        for k in range(n):
            for sgn in (1.0, -1.0):
                c = np.zeros(n)
                c[k] = sgn * t
                cands.append(c)
    for c in cands:
        if np.min(np.linalg.norm(pts - c, axis=-1)) >= radius:
            return c
    raise CenterOnSurface("no admissible inversion center found along the axes")


def sample_points_for(S):
    from .surfaces import sample_surface_points

    return sample_surface_points(S)


def invariance_probe(m, S, region=None, tol=1e-7, before=None):
    """∫|A0|^2 dμ of S and of m∘S over the same parameter region.

    ``before`` may carry a previous result for S itself, so that several
    maps can be probed against a single reference integral.
    """
    from .quad import integrate_surface

    T = transform_surface(m, S)
    if region is not None:
        T = _restrict_like(T, S)
    if before is None:
        before = integrate_surface(S, ("a0sq",), tol=tol, region=region)[0]
    after = integrate_surface(T, ("a0sq",), tol=tol, region=region)
    return before, after[0]


def _restrict_like(T, S):
    from dataclasses import replace

    return replace(T, domain=S.domain, charts=T.charts[: len(S.charts)], singular_points=S.singular_points)


def mean_curvature_inversion_check(S, inversion, points, chart=0):
    """Compare the jet-computed H of an inverted minimal surface with the inversion law.

    The law H̃ = (|h|^k / r^2) R_h (H + 4 h^⊥ / |h|^2), h = f - x0, R_h the
    reflection in the hyperplane orthogonal to h, is evaluated for k = 2 and
    k = 4.  Returns ({k: max relative residual}, selected exponent or None).
    """
    from .geometry import fundamental_forms

    j = S.jet(points, chart)
    cd = fundamental_forms(j)
    jt = push_jet_ambient(j, MobiusMap([inversion]))
    Ht = fundamental_forms(jt).H
    h = j.value - np.asarray(inversion.center, dtype=float)
    fx, fy = j.d1[..., 0, :], j.d1[..., 1, :]
    ginv = np.linalg.inv(cd.g)
    c = np.stack([np.einsum("...n,...n->...", h, fx), np.einsum("...n,...n->...", h, fy)], -1)
    coef = np.einsum("...ab,...b->...a", ginv, c)
    hperp = h - coef[..., 0, None] * fx - coef[..., 1, None] * fy
    hn2 = np.einsum("...n,...n->...", h, h)
    hhat = h / np.sqrt(hn2)[..., None]
    inner = cd.H + 4.0 * hperp / hn2[..., None]
    refl = inner - 2.0 * np.einsum("...n,...n->...", inner, hhat)[..., None] * hhat
    r2 = inversion.radius**2
    norm_t = np.maximum(np.linalg.norm(Ht, axis=-1), 1e-300)
    residuals = {}
    for k in (2, 4):
        pred = (hn2 ** (k / 2.0) / r2)[..., None] * refl
        residuals[k] = float(np.max(np.linalg.norm(Ht - pred, axis=-1) / norm_t))
    ok = [k for k, r in residuals.items() if r <= 1e-6]
    selected = ok[0] if len(ok) == 1 else None
    log.info("inversion law residuals %s; selected |h|^%s convention", residuals, selected)
    return residuals, selected
