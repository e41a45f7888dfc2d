"""Adaptive polar Gauss–Legendre quadrature over disks, annuli, planes and two-chart spheres.

Integrands are vectorized: ``density(points)`` maps an (N, 2) array of
parameter points to an (N, k) array, so several functionals share one
pass of jet evaluations.  Every cell is a polar rectangle; its estimate
is the 16x16 tensor rule, and its error is the difference between that
rule and the sum over its four children.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NoDecayDetected, ToleranceNotMet

log = logging.getLogger(__name__)

GL_ORDER = 16
MAX_DEPTH = 24
MAX_RINGS = 40
CHUNK = 1 << 15
ATOL = 1e-13
EPS = np.finfo(float).eps

_X, _W = np.polynomial.legendre.leggauss(GL_ORDER)
_THREADS = 1


def set_threads(n):
    global _THREADS
    _THREADS = max(1, int(n))


def configure(max_depth=None, max_rings=None, threads=None):
    """Change the refinement depth cap, the ring cap or the evaluation pool size."""
    global MAX_DEPTH, MAX_RINGS
    if max_depth is not None:
        MAX_DEPTH = int(max_depth)
    if max_rings is not None:
        MAX_RINGS = int(max_rings)
    if threads is not None:
        set_threads(threads)


@dataclass
class QuadResult:
    value: float
    error_estimate: float
    evaluations: int = 0
    subdivisions: int = 0
    flagged: bool = False

    def to_dict(self):
        return {"value": self.value, "error": self.error_estimate, "evals": self.evaluations}


@dataclass
class _Pool:
    """Working state for a vector-valued integration."""

    evaluations: int = 0
    subdivisions: int = 0
    flagged: bool = False
    notes: list = field(default_factory=list)


def _evaluate(density, pts, pool):
    n = pts.shape[0]
    pool.evaluations += n
    if n <= CHUNK:
        return np.asarray(density(pts), dtype=float)
    chunks = [pts[i:i + CHUNK] for i in range(0, n, CHUNK)]
    if _THREADS > 1:
        with ThreadPoolExecutor(_THREADS) as ex:
            parts = list(ex.map(density, chunks))
    else:
        parts = [density(c) for c in chunks]
    return np.concatenate([np.asarray(p, dtype=float) for p in parts])


def _rule(density, cells, pool):
    """16x16 tensor Gauss–Legendre estimate on each polar cell; returns (M, k)."""
    cells = np.asarray(cells, dtype=float)
    r0, r1, t0, t1 = cells.T
    hr, ht = 0.5 * (r1 - r0), 0.5 * (t1 - t0)
    r = (r0 + r1)[:, None] * 0.5 + hr[:, None] * _X  # (M, 16)
    t = (t0 + t1)[:, None] * 0.5 + ht[:, None] * _X
    rr = np.repeat(r[:, :, None], GL_ORDER, axis=2)
    tt = np.repeat(t[:, None, :], GL_ORDER, axis=1)
    pts = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
    vals = _evaluate(density, pts, pool)
    k = vals.shape[-1]
    vals = vals.reshape(len(cells), GL_ORDER, GL_ORDER, k)
    w = (_W[:, None] * _W[None, :])[None] * rr * (hr * ht)[:, None, None]
    return np.einsum("mij,mijk->mk", w, vals)


def _split(cells):
    r0, r1, t0, t1 = np.asarray(cells, dtype=float).T
    rm, tm = 0.5 * (r0 + r1), 0.5 * (t0 + t1)
    kids = np.stack([
        np.stack([r0, rm, t0, tm], -1), np.stack([rm, r1, t0, tm], -1),
        np.stack([r0, rm, tm, t1], -1), np.stack([rm, r1, tm, t1], -1),
    ], axis=1)
    return kids.reshape(-1, 4)


def _refine_level(density, cells, est, pool):
    """Return children-sum values and error estimates for ``cells`` with known estimates."""
    kids = _split(cells)
    kid_est = _rule(density, kids, pool).reshape(len(cells), 4, -1)
    val = kid_est.sum(axis=1)
    err = np.abs(est - val)
    bad = ~np.isfinite(err)
    err[bad] = np.inf
    return val, err, kids, kid_est


def _budget(total, tol, atol):
    scale = np.abs(total)
    return np.maximum(tol * scale, atol)


def adaptive_cells(density, cells, tol, atol=ATOL, pool=None, max_depth=None):
    """Globally adaptive integration over a list of polar cells.

    Returns (value (k,), error (k,), per-cell values (M_final, k), final cells).
    """
    pool = pool or _Pool()
    max_depth = MAX_DEPTH if max_depth is None else max_depth
    cells = np.asarray(cells, dtype=float)
    est = _rule(density, cells, pool)
    val, err, kids, kid_est = _refine_level(density, cells, est, pool)
    depth = np.zeros(len(cells), dtype=int)
    while True:
        fin_val = np.where(np.isfinite(val), val, 0.0)
        total = fin_val.sum(axis=0)
        budget = _budget(total, tol, atol)
        e = np.max(err / budget, axis=-1)
        if e.sum() <= 1.0:
            break
        order = np.argsort(-e, kind="stable")
        csum = np.cumsum(e[order])
        # refine the largest contributors until the rest is within half the budget
        n_ref = int(np.searchsorted(e.sum() - csum, 0.5, side="right")) + 1
        chosen = order[:n_ref]
        chosen = chosen[depth[chosen] < max_depth]
        if chosen.size == 0:
            pool.flagged = True
            pool.notes.append("maximum refinement depth reached")
            break
        keep = np.ones(len(cells), dtype=bool)
        keep[chosen] = False
        new_cells = kids.reshape(len(cells), 4, 4)[chosen].reshape(-1, 4)
        new_est = kid_est[chosen].reshape(-1, kid_est.shape[-1])
        nv, ne, nk, nke = _refine_level(density, new_cells, new_est, pool)
        pool.subdivisions += len(chosen)
        cells = np.concatenate([cells[keep], new_cells])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        kids = np.concatenate([kids.reshape(len(keep), 4, 4)[keep].reshape(-1, 4), nk])
        kid_est = np.concatenate([kid_est[keep], nke])
        depth = np.concatenate([depth[keep], np.repeat(depth[chosen] + 1, 4)])
    nonfinite = ~np.isfinite(val)
    if np.any(nonfinite):
        pool.flagged = True
        pool.notes.append(f"{int(nonfinite.any(axis=-1).sum())} cells skipped (degenerate metric)")
        val = np.where(nonfinite, 0.0, val)
    err = np.where(np.isfinite(err), err, 0.0)
    value = val.sum(axis=0)
    error = err.sum(axis=0) + len(cells) * GL_ORDER**2 * EPS * np.abs(val).sum(axis=0)
    return value, error, val, cells


def _shell_cells(r0, r1, n_theta=4):
    t = np.linspace(0.0, 2 * np.pi, n_theta + 1)
    return np.array([[r0, r1, t[i], t[i + 1]] for i in range(n_theta)])


def _annulus_cells(r_in, r_out, n_theta=4):
    """Dyadic radial subshells (ratio ≤ 2) covering [r_in, r_out]."""
    edges = [r_in]
    while edges[-1] * 2 < r_out:
        edges.append(edges[-1] * 2)
    edges.append(r_out)
    return np.concatenate([_shell_cells(a, b, n_theta) for a, b in zip(edges[:-1], edges[1:])])


def _geometric_tail(c):
    """Extrapolated remainder of a geometrically decaying sequence of contributions.

    ``c`` is (3, k): the last three contributions, oldest first.  Returns
    (tail, bound).
    """
    c = np.asarray(c, dtype=float)
    tail = np.zeros(c.shape[-1])
    bound = np.zeros(c.shape[-1])
    for i in range(c.shape[-1]):
        a, b, d = c[:, i]
        qs = [x / y for x, y in ((d, b), (b, a)) if y != 0.0]
        if not qs:
            continue
        q = qs[0]
        qmax = max(abs(x) for x in qs)
        if 0.0 <= q < 1.0:
            tail[i] = d * q / (1.0 - q)
        if qmax < 1.0:
            bound[i] = abs(d) * qmax / (1.0 - qmax)
        else:
            bound[i] = abs(d)
        bound[i] = max(bound[i], abs(tail[i]))
    return tail, bound


def _shell_value(density, r0, r1, pool):
    cells = _shell_cells(r0, r1)
    est = _rule(density, cells, pool)
    val, _, _, _ = _refine_level(density, cells, est, pool)
    v = np.where(np.isfinite(val), val, 0.0).sum(axis=0)
    return v, bool(np.all(np.isfinite(val)))


def _small(c, accum, tol, atol):
    return np.all(np.abs(c) <= np.maximum(0.1 * tol * np.abs(accum), atol))


def _inward_shells(density, R, tol, atol, r_hint, pool):
    """Radii of dyadic shells from R toward 0; returns (edges, coarse contributions)."""
    edges = [R]
    contribs = []
    accum = 0.0
    for _ in range(200):
        r1 = edges[-1]
        r0 = 0.5 * r1
        c, ok = _shell_value(density, r0, r1, pool)
        if not ok:
            # the disk below r1 is dropped, so the value cannot be trusted
            pool.notes.append(f"degenerate metric inside radius {r1:.3g}")
            pool.flagged = True
            break
        edges.append(r0)
        contribs.append(c)
        accum = accum + c
        if r0 < 0.25 * r_hint and len(contribs) >= 3 and _small(contribs[-1], accum, tol, atol) \
                and _small(contribs[-2], accum, tol, atol):
            break
    return edges, contribs


def _by_shell(cells, vals, edges):
    """Sum per-cell values into the shells delimited by descending ``edges``."""
    mids = 0.5 * (cells[:, 0] + cells[:, 1])
    out = []
    for a, b in zip(edges[1:], edges[:-1]):
        m = (mids >= a) & (mids < b)
        out.append(vals[m].sum(axis=0))
    return np.array(out)


def integrate_disk_vec(density, R, tol, r_hint=None, atol=ATOL, pool=None):
    """Disk of radius R integrated in dyadic shells toward a possibly singular center."""
    pool = pool or _Pool()
    r_hint = R if r_hint is None else min(r_hint, R)
    edges, _ = _inward_shells(density, R, tol, atol, r_hint, pool)
    if len(edges) < 2:
        raise ToleranceNotMet("disk integration could not start (degenerate at the boundary)")
    cells = np.concatenate([_shell_cells(a, b) for a, b in zip(edges[1:], edges[:-1])])
    value, error, vals, cells = adaptive_cells(density, cells, tol, atol, pool)
    shells = _by_shell(cells, vals, edges)
    if len(shells) >= 3:
        tail, bound = _geometric_tail(shells[-3:])
        value = value + tail
        error = error + bound
    return value, error


def integrate_plane_vec(density, tol, r_hint=(1.0, 1.0), atol=ATOL, pool=None, max_rings=None):
    """Whole plane: unit disk plus dyadic rings outward with a geometric tail."""
    pool = pool or _Pool()
    max_rings = MAX_RINGS if max_rings is None else max_rings
    lo, hi = r_hint
    inner_v, inner_e = integrate_disk_vec(density, 1.0, tol, r_hint=lo, atol=atol, pool=pool)
    edges = [1.0]
    contribs = []
    accum = inner_v.copy()
    decayed = False
    for _ in range(max_rings):
        r0 = edges[-1]
        c, _ = _shell_value(density, r0, 2 * r0, pool)
        edges.append(2 * r0)
        contribs.append(c)
        accum = accum + c
        if edges[-1] > 4 * hi and len(contribs) >= 3 and _small(contribs[-1], accum, tol, atol) \
                and _small(contribs[-2], accum, tol, atol):
            decayed = True
            break
    if not decayed:
        raise NoDecayDetected(f"no geometric decay after {max_rings} rings")
    cells = np.concatenate([_shell_cells(a, b) for a, b in zip(edges[:-1], edges[1:])])
    value, error, vals, cells = adaptive_cells(density, cells, tol, atol, pool)
    rings = _by_shell(cells, vals, edges[::-1])[::-1]
    tail, bound = _geometric_tail(rings[-3:])
    return inner_v + value + tail, inner_e + error + bound


def _finish(pool, value, error, index=None):
    v = float(value if index is None else value[index])
    e = float(error if index is None else error[index])
    return QuadResult(v, e, pool.evaluations, pool.subdivisions, pool.flagged)


def _scalar(density):
    def f(p):
        v = np.asarray(density(p), dtype=float)
        return v[..., None] if v.ndim == 1 else v

    return f


def integrate_annulus(density, r_in, r_out, tol=1e-8, atol=ATOL):
    """Adaptive integral of a scalar density over r_in ≤ |z| ≤ r_out."""
    pool = _Pool()
    value, error, _, _ = adaptive_cells(_scalar(density), _annulus_cells(r_in, r_out), tol, atol, pool)
    return _checked(pool, value, error)


def _checked(pool, value, error):
    res = _finish(pool, value, error, 0)
    if pool.flagged:
        raise ToleranceNotMet("; ".join(pool.notes), result=res)
    return res


def integrate_disk(density, R, tol=1e-8, r_hint=None, atol=ATOL):
    """Scalar density over |z| ≤ R, refined in dyadic shells toward the center."""
    pool = _Pool()
    value, error = integrate_disk_vec(_scalar(density), R, tol, r_hint, atol, pool)
    return _checked(pool, value, error)


def integrate_plane(density, tol=1e-8, r_hint=(1.0, 1.0), atol=ATOL):
    """Scalar density over the whole plane; needs geometric decay of the dyadic rings."""
    pool = _Pool()
    value, error = integrate_plane_vec(_scalar(density), tol, r_hint, atol, pool)
    return _checked(pool, value, error)


def _chart_density(S, chart, kinds):
    from .geometry import densities

    def f(p):
        return densities(S.jet(p, chart), kinds)

    return f


def integrate_closed(S, kinds, tol=1e-8, split=1.0, atol=ATOL, pool=None):
    """Chart 0 over |z| ≤ split plus chart 1 over |w| ≤ 1/split."""
    if S.domain != "two_chart_sphere":
        raise ValueError("integrate_closed needs a two-chart sphere")
    pool = pool or _Pool()
    lo = S.scales[0]
    v0, e0 = integrate_disk_vec(_chart_density(S, 0, kinds), split, tol, lo, atol, pool)
    v1, e1 = integrate_disk_vec(_chart_density(S, 1, kinds), 1.0 / split, tol, lo, atol, pool)
    return v0 + v1, e0 + e1


def integrate_surface(S, kinds=("willmore", "a2", "a0sq", "gauss"), tol=1e-8, region=None,
                      atol=ATOL, split=1.0):
    """Integrate several densities over a surface; returns a list of QuadResult.

    ``region=("disk", R)`` restricts to a disk in chart 0.  Double covers are
    halved.
    """
    pool = _Pool()
    kinds = tuple(kinds)
    if region is not None:
        kind, R = region
        if kind != "disk":
            raise ValueError(f"unsupported region {region!r}")
        value, error = integrate_disk_vec(_chart_density(S, 0, kinds), R, tol, S.scales[0], atol, pool)
    elif S.domain == "two_chart_sphere":
        value, error = integrate_closed(S, kinds, tol, split, atol, pool)
    elif S.domain in ("plane", "punctured_plane"):
        value, error = integrate_plane_vec(_chart_density(S, 0, kinds), tol, S.scales, atol, pool)
    elif S.domain == "disk":
        value, error = integrate_disk_vec(_chart_density(S, 0, kinds), S.radii[0], tol, S.scales[0], atol, pool)
    elif S.domain == "annulus":
        value, error, _, _ = adaptive_cells(_chart_density(S, 0, kinds), _annulus_cells(*S.radii), tol, atol, pool)
    else:
        raise ValueError(f"unknown domain {S.domain!r}")
    if S.double_cover and region is None:
        value, error = 0.5 * value, 0.5 * error
    for note in pool.notes:
        log.debug("%s: %s", S.name, note)
    return [_finish(pool, value, error, i) for i in range(len(kinds))]


@dataclass
class Extrapolation:
    limit: float
    rate: float | None
    confidence: float
    monotone: bool


def extrapolate_limit(rhos, values):
    """Fit v(ρ) = L + c ρ^p on a geometric ρ grid (≥ 3 points).

    The exponent comes from a regression of log|Δv| on log ρ; L and c from
    least squares given p.  ``confidence`` is the relative RMS residual of
    the fit (smaller is better); a sequence whose differences change sign is
    reported non-monotone.
    """
    rhos = np.asarray(rhos, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        raise ValueError("extrapolation needs at least three points")
    order = np.argsort(-rhos)
    rhos, v = rhos[order], v[order]
    d = np.diff(v)
    monotone = bool(np.all(d <= 0) or np.all(d >= 0))
    scale = max(np.max(np.abs(v)), 1e-300)
    if np.all(np.abs(d) <= 1e-14 * scale):
        return Extrapolation(float(v[-1]), None, 0.0, True)
    nz = np.abs(d) > 0
    if nz.sum() < 2:
        return Extrapolation(float(v[-1]), None, 1.0, monotone)
    x = np.log(rhos[:-1][nz])
    y = np.log(np.abs(d[nz]))
    p = float(np.polyfit(x, y, 1)[0])
    if not p > 0:
        return Extrapolation(float(v[-1]), p, 1.0, monotone)
    M = np.stack([np.ones_like(rhos), rhos**p], axis=-1)
    coef, *_ = np.linalg.lstsq(M, v, rcond=None)
    resid = v - M @ coef
    conf = float(np.sqrt(np.mean(resid**2)) / scale)
    return Extrapolation(float(coef[0]), p, conf, monotone)
