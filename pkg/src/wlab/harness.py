"""Experiment drivers: energy reports, consistency checks, sweeps, blow-downs and mesh export."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import NotConformalOnRegion
from .geometry import conformal_factor
from .quad import QuadResult, extrapolate_limit, integrate_surface
from .surfaces import halton_disk

log = logging.getLogger(__name__)

FUNCTIONALS = ("W", "a2", "a0", "totK")
_KINDS = ("willmore", "a2", "a0sq", "gauss")
CONFORMAL_TOL = 1e-8


def fmt(x):
    """17 significant digits: enough for a bit-exact round trip of a double."""
    return format(float(x), ".17g")


@dataclass
class Check:
    name: str
    residual: float
    budget: float

    @property
    def passed(self):
        return bool(abs(self.residual) <= self.budget)

    def to_dict(self):
        return {"name": self.name, "residual": self.residual, "budget": self.budget, "pass": self.passed}


@dataclass
class EnergyReport:
    surface: str
    params: dict
    W: QuadResult
    a2: QuadResult
    a0: QuadResult
    totK: QuadResult
    checks: list = field(default_factory=list)
    tol: float = 1e-8
    halved: bool = False

    @property
    def flagged(self):
        return any(getattr(self, k).flagged for k in FUNCTIONALS)

    @property
    def ok(self):
        return not self.flagged and all(c.passed for c in self.checks)

    def to_dict(self):
        return {
            "surface": self.surface,
            "params": _jsonable(self.params),
            "functionals": {k: getattr(self, k).to_dict() for k in FUNCTIONALS},
            "checks": [c.to_dict() for c in self.checks],
            "meta": {
                "version": __version__,
                "tolerances": {"quadrature": self.tol},
                "energy_convention": "per RP^2 (double cover halved)" if self.halved else "per surface",
            },
        }

    def to_json(self):
        return _dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        q = {k: QuadResult(float(v["value"]), float(v["error"]), int(v["evals"]))
             for k, v in d["functionals"].items()}
        checks = [Check(c["name"], float(c["residual"]), float(c["budget"])) for c in d["checks"]]
        meta = d.get("meta", {})
        return cls(d["surface"], d.get("params", {}), q["W"], q["a2"], q["a0"], q["totK"], checks,
                   meta.get("tolerances", {}).get("quadrature", 1e-8),
                   meta.get("energy_convention", "").startswith("per RP"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _dumps(d):
    # json writes floats with repr, the shortest decimal that round-trips exactly
    return json.dumps(_jsonable(d), indent=2, sort_keys=True)


def expected_total_curvature(S, chi=None, branch_orders=None):
    """2π(χ + Σ m(p)); on a halved double cover the branch sum counts both preimages."""
    chi = S.euler_char if chi is None else chi
    if chi is None:
        raise ValueError(f"{S.name}: no Euler characteristic declared")
    msum = S.branch_order_sum() if branch_orders is None else sum(branch_orders)
    if S.double_cover:
        return 2 * np.pi * (chi + 0.5 * msum)
    return 2 * np.pi * (chi + msum)


@dataclass
class GaussBonnet:
    expected_totK: float
    residual1: Check
    residual2: Check

    @property
    def passed(self):
        return self.residual1.passed and self.residual2.passed


def gauss_bonnet_check(S, report=None, chi=None, branch_orders=None, tol=1e-8):
    """residual₁ = ∫K − 2π(χ + Σm), residual₂ = ∫|A|² − (4W − 2∫K), budgets 10× combined error."""
    rep = report if report is not None else energy_report(S, tol, checks=False)
    exp_k = expected_total_curvature(S, chi, branch_orders)
    r1 = Check("gauss_bonnet", rep.totK.value - exp_k, 10 * rep.totK.error_estimate)
    r2 = Check(
        "gauss_equation_integral",
        rep.a2.value - (4 * rep.W.value - 2 * rep.totK.value),
        10 * (rep.a2.error_estimate + 4 * rep.W.error_estimate + 2 * rep.totK.error_estimate),
    )
    return GaussBonnet(exp_k, r1, r2)


def energy_report(S, tol=1e-8, checks=True):
    """All four functionals in one quadrature pass, with identity checks."""
    res = integrate_surface(S, _KINDS, tol=tol)
    W, a2, a0, K = res
    rep = EnergyReport(S.name, dict(S.params), W, a2, a0, K, tol=tol, halved=S.double_cover)
    if checks:
        rep.checks.append(Check("traceless_identity", a0.value - (a2.value - 2 * W.value),
                                10 * (a0.error_estimate + a2.error_estimate + 2 * W.error_estimate)))
        if S.closed and S.euler_char is not None:
            gb = gauss_bonnet_check(S, rep)
            rep.checks.extend([gb.residual1, gb.residual2])
    if rep.flagged:
        log.warning("%s: quadrature did not reach tolerance %g", S.name, tol)
    return rep


# ------------------------------------------------------------------- sweeps


def construction_builder(construction, m=None, delta=None):
    """Map ρ ↦ surface for ``chen-glue``, ``enneper-glue``, ``henneper-glue``, the
    ``-model`` / ``-bar`` intermediates, and ``meeks-boy`` (δ = √ρ unless given)."""
    from . import glue

    construction = construction.lower()
    if construction == "meeks-boy":
        base = glue.inverted_meeks()

        def build(rho):
            d = float(np.sqrt(rho)) if delta is None else delta
            return glue.meeks_boy_glue(rho, d, base=base)[0]

        return build
    fam_name, _, kind = construction.partition("-")
    fam = glue.family(fam_name, m)
    makers = {"glue": glue.double_glue, "model": glue.model_glue, "bar": glue.glue_bar}
    if kind not in makers:
        raise ValueError(f"unknown construction {construction!r}")
    return lambda rho: makers[kind](fam, rho)


@dataclass
class SweepTable:
    construction: str
    rhos: list
    reports: list
    tol: float

    def column(self, key):
        return np.array([getattr(r, key).value for r in self.reports])

    def errors(self, key):
        return np.array([getattr(r, key).error_estimate for r in self.reports])

    def extrapolate(self, key):
        return extrapolate_limit(self.rhos, self.column(key))

    def monotone_steps(self, key="W", factor=3.0):
        """Per step (in decreasing ρ order): v_{i+1} ≤ v_i + factor·(e_i + e_{i+1})."""
        order = np.argsort(-np.asarray(self.rhos))
        v, e = self.column(key)[order], self.errors(key)[order]
        return [bool(v[i + 1] <= v[i] + factor * (e[i] + e[i + 1])) for i in range(len(v) - 1)]

    @property
    def halved(self):
        return bool(self.reports and self.reports[0].halved)

    def rows(self):
        for rho, r in zip(self.rhos, self.reports):
            row = {"rho": rho}
            for k in FUNCTIONALS:
                q = getattr(r, k)
                row[k] = q.value
                row[f"{k}_err"] = q.error_estimate
            row["evals"] = r.W.evaluations
            yield row

    def to_csv(self):
        buf = io.StringIO()
        cols = ["rho"] + [c for k in FUNCTIONALS for c in (k, f"{k}_err")] + ["evals", "convention"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        conv = "per_RP2" if self.halved else "per_surface"
        for row in self.rows():
            w.writerow([fmt(row[c]) if c not in ("evals",) else row[c] for c in cols[:-1]] + [conv])
        return buf.getvalue()

    def to_dict(self):
        extra = {}
        if len(self.rhos) >= 3:
            for k in ("W", "a2"):
                ex = self.extrapolate(k)
                extra[k] = {"limit": ex.limit, "rate": ex.rate, "confidence": ex.confidence,
                            "monotone": ex.monotone}
        return {
            "construction": self.construction,
            "rows": list(self.rows()),
            "extrapolation": extra,
            "monotone_W_steps": self.monotone_steps("W"),
            "meta": {"version": __version__, "tolerances": {"quadrature": self.tol},
                     "energy_convention": "per RP^2 (double cover halved)" if self.halved else "per surface"},
        }

    def to_json(self):
        return _dumps(self.to_dict())


def sweep(construction, rhos, tol=1e-6, m=None, delta=None, builder=None):
    """Energy reports of a construction over a list of ρ values."""
    build = builder or construction_builder(construction, m, delta)
    reports = []
    for rho in rhos:
        S = build(rho)
        reports.append(energy_report(S, tol))
        log.info("%s rho=%g: W=%.10g a2=%.10g", construction, rho, reports[-1].W.value, reports[-1].a2.value)
    return SweepTable(construction, [float(r) for r in rhos], reports, tol)


def read_sweep_csv(text):
    """Parse :meth:`SweepTable.to_csv` output back into a list of float rows."""
    rows = list(csv.DictReader(io.StringIO(text)))
    return [{k: (v if k == "convention" else float(v)) for k, v in row.items()} for row in rows]


# ---------------------------------------------------- pointwise comparisons


def region_points(region, n=4096):
    """Halton points of ``("disk", R)`` or ``("annulus", a, b)``."""
    kind = region[0]
    if kind == "disk":
        return halton_disk(n, float(region[1]))
    if kind == "annulus":
        a, b = float(region[1]), float(region[2])
        p = halton_disk(n, b)
        return p[np.hypot(p[:, 0], p[:, 1]) >= a]
    raise ValueError(f"unknown region {region!r}")


def conformal_factor_compare(S1, S2, region=("annulus", 0.1, 0.5), n=4096, chart=0):
    """sup |u₁ − u₂| over a Halton sample of the region, u = ½ log g₁₁."""
    p = region_points(region, n)
    us = []
    for S in (S1, S2):
        u, res = conformal_factor(S.jet(p, chart))
        worst = float(np.max(res))
        if worst > CONFORMAL_TOL:
            raise NotConformalOnRegion(f"{S.name}: conformality residual {worst:.3g} on the region")
        us.append(u)
    return float(np.max(np.abs(us[0] - us[1])))


@dataclass
class BlowDownTable:
    rhos: list
    deviations: list
    frame: np.ndarray

    @property
    def strictly_decreasing(self):
        order = np.argsort(-np.asarray(self.rhos))
        d = np.asarray(self.deviations)[order]
        return bool(np.all(np.diff(d) < 0))

    def to_dict(self):
        return {"rhos": self.rhos, "deviations": self.deviations, "frame": self.frame.tolist(),
                "strictly_decreasing": self.strictly_decreasing}


def blow_down_check(S, rhos, model, power, annulus=(1.0, 2.0), n=1024, fit=True):
    """sup over the annulus of |ρ^k S(z/ρ) − O·model(z)|.

    The orthogonal O is fitted once (Procrustes, at the smallest ρ) and reused
    for every ρ; it is returned so the identification is reported, not assumed.
    """
    from .weierstrass import fit_orthogonal

    p = region_points(("annulus",) + tuple(annulus), n)
    z = p[:, 0] + 1j * p[:, 1]
    target = np.asarray(model(z), dtype=float)
    blown = {rho: rho**power * S.jet_at(z / rho).value for rho in rhos}
    if fit:
        Q = fit_orthogonal(target, blown[min(rhos)])
    else:
        Q = np.eye(target.shape[-1])
    devs = [float(np.max(np.linalg.norm(blown[rho] - target @ Q.T, axis=-1))) for rho in rhos]
    return BlowDownTable([float(r) for r in rhos], devs, Q)


def branched_plane_model(m, dim=4):
    def model(z):
        w = np.asarray(z, dtype=complex) ** m
        out = np.zeros(w.shape + (dim,))
        out[..., 0], out[..., 1] = w.real, w.imag
        return out

    return model


# -------------------------------------------------------------- mesh export


def _grid_points(S, n1, n2, radius=None):
    """Parameter grid (n1 radial/latitude × n2 angular) and the chart per vertex."""
    phi = 2 * np.pi * np.arange(n2) / (n2 - 1)
    if S.domain == "two_chart_sphere":
        theta = np.pi * (np.arange(n1) + 0.5) / n1
        r = np.tan(0.5 * theta)
    elif S.domain == "disk":
        R = radius or S.radii[0]
        r = R * (np.arange(n1) + 1) / n1
    elif S.domain == "annulus":
        r = np.linspace(S.radii[0], S.radii[1], n1)
    elif S.domain == "punctured_plane":
        r = np.geomspace(0.25, radius or 4.0, n1)
    else:
        R = radius or 2.0
        r = R * (np.arange(n1) + 1) / n1
    rr, pp = np.meshgrid(r, phi, indexing="ij")
    return (rr * np.exp(1j * pp)).ravel()


def _evaluate_grid(S, z):
    if S.domain != "two_chart_sphere":
        return S.jet_at(z).value
    out = np.empty((z.size, S.ambient_dim))
    inner = np.abs(z) <= 1.0
    out[inner] = S.jet_at(z[inner], 0).value
    out[~inner] = S.jet_at(1.0 / np.conj(z[~inner]), 1).value
    return out


def project_to_r3(x, project="drop"):
    """R⁴ → R³ by dropping x₄, or central projection from −d·e₄ onto x₄ = 0."""
    if x.shape[-1] == 3:
        return x
    if project == "drop":
        return x[..., :3]
    if project == "stereographic":
        d = 2.0 * max(1.0, float(np.max(np.abs(x[..., 3]))))
        return d * x[..., :3] / (d + x[..., 3])[..., None]
    raise ValueError(f"unknown projection {project!r}")


def export_mesh(S, path, grid=(16, 16), project="drop", radius=None):
    """Write an OBJ triangle mesh of S on a polar parameter grid; returns (vertices, faces)."""
    n1, n2 = grid
    z = _grid_points(S, n1, n2, radius)
    X = project_to_r3(_evaluate_grid(S, z), project)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{S.name}: non-finite vertices on the export grid")
    faces = []
    for i in range(n1 - 1):
        for j in range(n2 - 1):
            a = i * n2 + j + 1
            b, c, d = a + 1, a + n2, a + n2 + 1
            faces.append((a, c, d))
            faces.append((a, d, b))
    with open(path, "w") as fh:
        fh.write(f"# {S.name}\n")
        for v in X:
            fh.write("v {} {} {}\n".format(*(fmt(c) for c in v)))
        for f in faces:
            fh.write("f {} {} {}\n".format(*f))
    return len(X), len(faces)
