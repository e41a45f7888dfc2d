import json

import numpy as np
import pytest

from oracles import annulus_sample
from wlab.errors import NotConformalOnRegion
from wlab.glue import model_glue, parse_construction_id
from wlab.harness import (EnergyReport, blow_down_check, branched_plane_model, conformal_factor_compare,
                          energy_report, export_mesh, gauss_bonnet_check, project_to_r3, read_sweep_csv,
                          region_points, sweep)
from wlab.surfaces import branched_plane, chen_graph, enneper, parse_surface_id, rescaled_chen, round_sphere

PI = np.pi


# ------------------------------------------------------------------ reports


def test_enneper_report():
    rep = energy_report(enneper(), 1e-8)
    assert rep.a2.value == pytest.approx(8 * PI, rel=1e-6)
    assert abs(rep.W.value) < 1e-9
    assert rep.ok


def test_flat_plane_report_is_all_zero():
    rep = energy_report(parse_surface_id("plane:1"), 1e-8)
    for q in (rep.W, rep.a2, rep.a0, rep.totK):
        assert abs(q.value) < 1e-12


def test_traceless_identity_is_checked_on_every_report():
    for S in (round_sphere(2.0), chen_graph(), parse_construction_id("inverted:chen")):
        rep = energy_report(S, 1e-8)
        check = next(c for c in rep.checks if c.name == "traceless_identity")
        assert check.passed, check


def test_report_json_round_trip_is_exact():
    rep = energy_report(parse_construction_id("inverted:chen"), 1e-8)
    text = rep.to_json()
    back = EnergyReport.from_dict(json.loads(text))
    for k in ("W", "a2", "a0", "totK"):
        a, b = getattr(rep, k), getattr(back, k)
        assert (a.value, a.error_estimate, a.evaluations) == (b.value, b.error_estimate, b.evaluations)
    assert [c.residual for c in rep.checks] == [c.residual for c in back.checks]
    assert back.to_json() == text


def test_report_schema():
    d = energy_report(round_sphere(1.0), 1e-8).to_dict()
    assert set(d) == {"surface", "params", "functionals", "checks", "meta"}
    assert set(d["functionals"]) == {"W", "a2", "a0", "totK"}
    assert set(d["functionals"]["W"]) == {"value", "error", "evals"}
    assert set(d["checks"][0]) == {"name", "residual", "budget", "pass"}
    assert {"version", "tolerances"} <= set(d["meta"])


def test_double_cover_reports_are_labelled_halved():
    d = energy_report(parse_surface_id("veronese"), 1e-7).to_dict()
    assert d["meta"]["energy_convention"].startswith("per RP^2")


def test_sweep_csv_round_trip_is_exact():
    table = sweep("spheres", [2.0, 1.0, 0.5], tol=1e-8, builder=round_sphere)
    rows = read_sweep_csv(table.to_csv())
    for row, rho, rep in zip(rows, table.rhos, table.reports):
        assert row["rho"] == rho
        for k in ("W", "a2", "a0", "totK"):
            assert row[k] == getattr(rep, k).value
            assert row[f"{k}_err"] == getattr(rep, k).error_estimate
        assert row["convention"] == "per_surface"


def test_sweep_json_has_extrapolation():
    table = sweep("spheres", [2.0, 1.0, 0.5], tol=1e-8, builder=round_sphere)
    d = json.loads(table.to_json())
    assert d["extrapolation"]["W"]["limit"] == pytest.approx(4 * PI, rel=1e-8)
    assert d["monotone_W_steps"] == [True, True]


# ------------------------------------------------------------- Gauss–Bonnet


def test_gauss_bonnet_inverted_enneper():
    S = parse_construction_id("inverted:enneper")
    gb = gauss_bonnet_check(S, tol=1e-8)
    assert gb.expected_totK == pytest.approx(8 * PI)
    assert gb.passed


def test_gauss_bonnet_inverted_chen():
    gb = gauss_bonnet_check(parse_construction_id("inverted:chen"), tol=1e-8)
    assert gb.expected_totK == pytest.approx(6 * PI)
    assert gb.passed


def test_gauss_bonnet_round_sphere():
    S = round_sphere(1.0)
    rep = energy_report(S, 1e-9)
    assert rep.a2.value == pytest.approx(4 * rep.W.value - 2 * rep.totK.value, rel=1e-9)
    assert rep.a2.value == pytest.approx(8 * PI, rel=1e-8)
    assert gauss_bonnet_check(S, rep).passed


def test_gauss_bonnet_detects_a_wrong_branch_count():
    S = parse_construction_id("inverted:chen")
    gb = gauss_bonnet_check(S, chi=2, branch_orders=[], tol=1e-8)
    assert not gb.residual1.passed


# ------------------------------------------------------ conformal factors


@pytest.mark.parametrize("a", [0.1, 0.25])
def test_rescaled_chen_factor_against_closed_form(a):
    rhos = [0.2, 0.1, 0.05]
    sups = [conformal_factor_compare(rescaled_chen(r), branched_plane(2), ("annulus", a, 0.5)) for r in rhos]
    p = region_points(("annulus", a, 0.5))
    r2 = np.sum(p * p, -1)
    for rho, sup in zip(rhos, sups):
        # u_ρ − u_0 = ½ log(4|z|² + ρ²) − ½ log(4|z|²)
        oracle = np.max(0.5 * np.log1p(rho * rho / (4 * r2)))
        assert sup == pytest.approx(oracle, rel=1e-12)
    assert sups[0] > sups[1] > sups[2]


def test_identical_surfaces_have_equal_factors():
    assert conformal_factor_compare(enneper(), enneper(), ("disk", 1.0)) == 0.0


def test_spheres_of_radius_one_and_two():
    sup = conformal_factor_compare(round_sphere(1.0), round_sphere(2.0), ("disk", 1.0))
    assert sup == pytest.approx(np.log(2.0), rel=1e-13)


def test_non_conformal_region_is_refused():
    S = model_glue("enneper", 0.1)
    with pytest.raises(NotConformalOnRegion):
        conformal_factor_compare(S, S, ("annulus", 0.6, 0.9))


# ---------------------------------------------------------------- blow-down


def test_branched_plane_blows_down_to_itself():
    table = blow_down_check(branched_plane(3), [0.1, 0.05], branched_plane_model(3), 3, fit=False)
    assert max(table.deviations) < 1e-12


def test_chen_blow_down_deviation_is_linear_in_rho():
    rhos = [0.1, 0.05, 0.025]
    table = blow_down_check(chen_graph(), rhos, branched_plane_model(2), 2, fit=False)
    p = region_points(("annulus", 1.0, 2.0), 1024)
    rmax = np.max(np.hypot(p[:, 0], p[:, 1]))
    # ρ² f_C(z/ρ) − (z², 0) = (0, ρz)
    np.testing.assert_allclose(table.deviations, np.array(rhos) * rmax, rtol=1e-12)
    assert table.strictly_decreasing


def test_blow_down_fit_returns_an_orthogonal_frame():
    table = blow_down_check(chen_graph(), [0.1, 0.05], branched_plane_model(2), 2)
    np.testing.assert_allclose(table.frame @ table.frame.T, np.eye(4), atol=1e-12)


# ------------------------------------------------------------------- export


def _read_obj(path):
    verts, faces = [], []
    for line in open(path):
        if line.startswith("v "):
            verts.append([float(t) for t in line.split()[1:]])
        elif line.startswith("f "):
            faces.append([int(t) for t in line.split()[1:]])
    return np.array(verts), np.array(faces)


def test_sphere_export_counts(tmp_path):
    path = tmp_path / "sphere.obj"
    assert export_mesh(round_sphere(1.0), path, (16, 16)) == (256, 450)
    V, F = _read_obj(path)
    assert V.shape == (256, 3) and F.shape == (450, 3)
    np.testing.assert_allclose(np.linalg.norm(V, axis=-1), 1.0, rtol=1e-14)


def test_enneper_export_is_a_clean_manifold(tmp_path):
    path = tmp_path / "enneper.obj"
    export_mesh(enneper(), path, (12, 24))
    V, F = _read_obj(path)
    assert np.all(np.isfinite(V))
    assert F.min() >= 1 and F.max() <= len(V)
    edges = {}
    for tri in F:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0) + 1
    assert max(edges.values()) <= 2
    assert all(len(set(t)) == 3 for t in F)


def test_meeks_export_is_finite(tmp_path):
    path = tmp_path / "meeks.obj"
    nv, nf = export_mesh(parse_surface_id("meeks"), path, (10, 20), radius=3.0)
    V, _ = _read_obj(path)
    assert len(V) == nv and np.all(np.isfinite(V))


def test_export_is_deterministic(tmp_path):
    a, b = tmp_path / "a.obj", tmp_path / "b.obj"
    export_mesh(chen_graph(), a)
    export_mesh(chen_graph(), b)
    assert a.read_bytes() == b.read_bytes()


def test_projections_to_three_space(rng):
    x = np.concatenate([annulus_sample(rng, 10, 0.0, 1.0), rng.normal(size=(10, 2))], -1)
    np.testing.assert_array_equal(project_to_r3(x), x[:, :3])
    st = project_to_r3(x, "stereographic")
    assert st.shape == (10, 3) and np.all(np.isfinite(st))
    with pytest.raises(ValueError):
        project_to_r3(x, "orthographic")
