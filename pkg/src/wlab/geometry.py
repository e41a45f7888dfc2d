"""Pointwise fundamental forms, curvatures and integrand densities.

Conventions: H = g^{ij} A_ij (trace, not average), so the unit sphere has
|H| = 2, |A|^2 = 2, K = 1 and |A|^2 = |H|^2 - 2K holds pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMetric

# det g must exceed this fraction of (tr g)²; the test is scale invariant so
# that tiny but honest immersions (deep inside an inverted copy) still count
EPS_IMMERSION = 1e-12
DET_FLOOR = 1e-290


def _degenerate(g11, g22, detg):
    tr = g11 + g22
    return ~((detg > EPS_IMMERSION * tr * tr) & (detg > DET_FLOOR))

DENSITY_KINDS = ("willmore", "a2", "a0sq", "gauss", "area")


@dataclass(frozen=True)
class CurvatureData:
    g: np.ndarray  # (..., 2, 2)
    detg: np.ndarray
    A: np.ndarray  # (..., 3, n): A11, A12, A22
    H: np.ndarray  # (..., n)
    A0: np.ndarray  # (..., 3, n)
    K: np.ndarray
    area_density: np.ndarray
    a2: np.ndarray  # |A|^2
    a0sq: np.ndarray  # |A0|^2

    @property
    def h2(self):
        return np.einsum("...n,...n->...", self.H, self.H)


def _dot(a, b):
    return np.einsum("...n,...n->...", a, b)


def fundamental_forms(j, strict=True):
    """Curvature data of a jet.

    With ``strict`` a degenerate metric anywhere raises DegenerateMetric;
    otherwise degenerate points come back as NaN.
    """
    fx, fy = j.d1[..., 0, :], j.d1[..., 1, :]
    g11, g12, g22 = _dot(fx, fx), _dot(fx, fy), _dot(fy, fy)
    detg = g11 * g22 - g12 * g12
    bad = _degenerate(g11, g22, detg)
    if np.any(bad):
        if strict:
            raise DegenerateMetric("induced metric is degenerate (branch point or cutoff pathology)")
        detg = np.where(bad, np.nan, detg)
    inv = 1.0 / detg
    # inverse metric
    h11, h12, h22 = g22 * inv, -g12 * inv, g11 * inv
    A = np.empty(j.d2.shape)
    for k in range(3):
        v = j.d2[..., k, :]
        c1 = _dot(v, fx)
        c2 = _dot(v, fy)
        a = h11 * c1 + h12 * c2
        b = h12 * c1 + h22 * c2
        A[..., k, :] = v - a[..., None] * fx - b[..., None] * fy
    A11, A12, A22 = A[..., 0, :], A[..., 1, :], A[..., 2, :]
    H = h11[..., None] * A11 + 2.0 * h12[..., None] * A12 + h22[..., None] * A22
    K = (_dot(A11, A22) - _dot(A12, A12)) * inv
    # |A|^2 = g^{ik} g^{jl} <A_ij, A_kl>
    p11, p12, p22 = _dot(A11, A11), _dot(A11, A12), _dot(A12, A12)
    q22, q12, q1122 = _dot(A22, A22), _dot(A12, A22), _dot(A11, A22)
    a2 = (
        h11 * h11 * p11
        + 4.0 * h11 * h12 * p12
        + 2.0 * h12 * h12 * q1122
        + 2.0 * (h11 * h22 + h12 * h12) * p22
        + 4.0 * h12 * h22 * q12
        + h22 * h22 * q22
    )
    h2 = _dot(H, H)
    a0sq = a2 - 0.5 * h2
    g = np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)
    gpk = np.stack([g11, g12, g22], axis=-1)[..., None]
    A0 = A - 0.5 * gpk * H[..., None, :]
    return CurvatureData(g, detg, A, H, A0, K, np.sqrt(detg), a2, a0sq)


def conformal_factor(j, strict=True):
    """Return (u, residual) with u = log(g11)/2 and the conformality defect."""
    fx, fy = j.d1[..., 0, :], j.d1[..., 1, :]
    g11, g12, g22 = _dot(fx, fx), _dot(fx, fy), _dot(fy, fy)
    detg = g11 * g22 - g12 * g12
    if strict and np.any(_degenerate(g11, g22, detg)):
        raise DegenerateMetric("induced metric is degenerate")
    u = 0.5 * np.log(g11)
    residual = (np.abs(g11 - g22) + 2.0 * np.abs(g12)) / g11
    return u, residual


def densities(j, kinds=("willmore", "a2", "a0sq", "gauss")):
    """Integrand densities (already weighted by the area element), stacked on the last axis.

    Degenerate points yield NaN.
    """
    cd = fundamental_forms(j, strict=False)
    out = []
    for kind in kinds:
        if kind == "willmore":
            out.append(0.25 * cd.h2 * cd.area_density)
        elif kind == "a2":
            out.append(cd.a2 * cd.area_density)
        elif kind == "a0sq":
            out.append(cd.a0sq * cd.area_density)
        elif kind == "gauss":
            out.append(cd.K * cd.area_density)
        elif kind == "area":
            out.append(cd.area_density)
        else:
            raise ValueError(f"unknown density kind {kind!r}")
    return np.stack(out, axis=-1)


def cauchy_riemann_residual(j):
    """max-norm of ∂_y f − J ∂_x f for a map into C^k ≅ R^{2k} (pairs (Re, Im))."""
    fx, fy = j.d1[..., 0, :], j.d1[..., 1, :]
    jfx = np.empty_like(fx)
    jfx[..., 0::2] = -fx[..., 1::2]
    jfx[..., 1::2] = fx[..., 0::2]
    scale = np.maximum(np.linalg.norm(fx, axis=-1), 1e-300)
    return np.linalg.norm(fy - jfx, axis=-1) / scale
