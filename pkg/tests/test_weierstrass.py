import logging

import numpy as np
import pytest

from oracles import annulus_sample
from wlab.errors import DivisionByZeroAtPole, ParseError, PathThroughPole, PeriodObstruction
from wlab.expr import Var, parse_expression
from wlab.geometry import conformal_factor, fundamental_forms
from wlab.harness import blow_down_check
from wlab.quad import integrate_surface
from wlab.weierstrass import (WeierstrassData, involution_check, meeks_data, meeks_surface, meeks_triple_plane,
                              path_integral, period_check, weierstrass_forms, weierstrass_immersion)

PI = np.pi


# ------------------------------------------------------------------ parser


@pytest.mark.parametrize("src,z,expected", [
    ("z^2*(z+1)/(z-1)", 2, 12),
    ("i*(z-1)^2/z^4", 1, 0),
    ("2.5e1 - 3i*z", 1j, 28),
    ("-z^-2", 2, -0.25),
    ("z^(-1) + (z)^(2)", 2, 4.5),
    ("((z))", 3 + 4j, 3 + 4j),
])
def test_parse_and_evaluate(src, z, expected):
    assert parse_expression(src).evaluate(np.array(z, dtype=complex)) == pytest.approx(expected)


@pytest.mark.parametrize("src,offset", [("z^^2", 2), ("z+", 2), ("(z", 2), ("z*/2", 2), ("2z", 1), ("z^1.5", 3)])
def test_parse_errors_report_offset(src, offset):
    with pytest.raises(ParseError) as info:
        parse_expression(src)
    assert info.value.position == offset
    assert info.value.source == src


def test_evaluation_at_a_pole():
    with pytest.raises(DivisionByZeroAtPole):
        parse_expression("1/(z-1)").evaluate(np.array([1.0 + 0j]))


def test_programmatic_trees_match_parsed():
    z = Var()
    tree = (z * z + 1) / (z - 2) ** 2
    parsed = parse_expression("(z*z+1)/(z-2)^2")
    w = np.array([0.3 + 0.1j, -1.5j])
    np.testing.assert_allclose(tree.evaluate(w), parsed.evaluate(w), rtol=1e-15)
    np.testing.assert_allclose(tree.jet(w).d2, parsed.jet(w).d2, rtol=1e-14)


# ------------------------------------------------------------ forms / periods


def test_meeks_third_form_simplifies(rng):
    phi3 = weierstrass_forms(meeks_data())[2]
    z = annulus_sample(rng, 20, 0.2, 3.0) @ np.array([1, 1j])
    np.testing.assert_allclose(phi3.evaluate(z), 1j * (z**2 - 1) / z**2, rtol=1e-12)


def test_meeks_periods_vanish():
    for phi in weierstrass_forms(meeks_data()):
        assert abs(period_check(phi, 0j, 0.5)) <= 1e-10


def test_simple_pole_is_a_period_obstruction():
    with pytest.raises(PeriodObstruction) as info:
        period_check(parse_expression("1/z"), 0j, 1.0)
    assert info.value.period == pytest.approx(2j * PI, rel=1e-12)


def test_real_mode_accepts_purely_imaginary_periods():
    # ∮ i/z dz = −2π is real; ∮ 1/z dz = 2πi is imaginary and leaves Re ∫ single-valued
    assert period_check(parse_expression("1/z"), 0j, 1.0, mode="real") == pytest.approx(2j * PI)
    with pytest.raises(PeriodObstruction):
        period_check(parse_expression("i/z"), 0j, 1.0, mode="real")


def test_immersion_refuses_multivalued_data():
    d = WeierstrassData.from_strings("z", "1/z")
    with pytest.raises(PeriodObstruction):
        weierstrass_immersion(d)


def test_basepoint_on_a_pole_is_rejected():
    d = WeierstrassData.from_strings("z", "1/(z-1)^2", punctures=(), basepoint=1.0)
    with pytest.raises(PathThroughPole):
        weierstrass_immersion(d, check_periods=False)


# --------------------------------------------------------------- immersions


def test_enneper_type_data(rng):
    S = weierstrass_immersion(WeierstrassData.from_strings("z", "1", punctures=()))
    j = S.jet(annulus_sample(rng, 100, 0.0, 3.0))
    assert np.max(np.linalg.norm(fundamental_forms(j).H, axis=-1)) <= 1e-9
    assert np.max(conformal_factor(j)[1]) <= 1e-10
    assert integrate_surface(S, ("a2",), tol=1e-8)[0].value == pytest.approx(8 * PI, rel=1e-6)


def test_meeks_total_curvature():
    rep = integrate_surface(meeks_surface(), ("gauss", "a2"), tol=1e-8)
    assert rep[0].value == pytest.approx(-6 * PI, rel=1e-5)
    assert rep[1].value == pytest.approx(12 * PI, rel=1e-5)


def test_meeks_is_minimal_and_conformal(rng):
    j = meeks_surface().jet(annulus_sample(rng, 200, 0.2, 3.0))
    cd = fundamental_forms(j)
    assert np.max(np.linalg.norm(cd.H, axis=-1) / np.sqrt(cd.a2)) <= 1e-9
    assert np.max(conformal_factor(j)[1]) <= 1e-12


def test_meeks_primitive_matches_closed_form_third_coordinate(rng):
    # Φ₃ = i(1 − 1/z²) has primitive i(z + 1/z); with basepoint 1 the constant is −2i
    z = annulus_sample(rng, 30, 0.2, 3.0) @ np.array([1, 1j])
    F = path_integral(meeks_data(), z)
    np.testing.assert_allclose(F[:, 2], 1j * (z + 1 / z) - 2j, atol=1e-12)


def test_path_independence(rng):
    z = annulus_sample(rng, 20, 0.3, 3.0) @ np.array([1, 1j])
    a = path_integral(meeks_data(), z, order="arc-first")
    b = path_integral(meeks_data(), z, order="ray-first")
    assert np.max(np.abs(a.real - b.real)) <= 1e-10


def test_shared_rays_give_the_same_values_as_single_points():
    z = np.array([0.5, 1.5, 3.0, 0.25]) * np.exp(0.7j)
    together = path_integral(meeks_data(), z)
    alone = np.array([path_integral(meeks_data(), np.array([w]))[0] for w in z])
    np.testing.assert_allclose(together, alone, atol=1e-13)


def test_meeks_involution():
    assert involution_check(meeks_data(), samples=50) <= 1e-8


def test_enneper_data_is_not_involution_compatible():
    d = WeierstrassData.from_strings("z", "1", punctures=(), involution="minus-inv-conj")
    assert involution_check(d, samples=50) > 1e-2


def test_meeks_blow_down_decreases():
    table = blow_down_check(meeks_surface(), [0.1, 0.05, 0.025], meeks_triple_plane, 3)
    assert table.strictly_decreasing
    # the triple plane is met in the given frame, not up to some rotation
    np.testing.assert_allclose(table.frame, np.eye(3), atol=0.05)


def test_inversion_law_selection_logs(caplog):
    from wlab.mobius import Invert, mean_curvature_inversion_check

    S = meeks_surface()
    p = annulus_sample(np.random.default_rng(3), 40, 0.4, 2.0)
    with caplog.at_level(logging.INFO, logger="wlab.mobius"):
        residuals, k = mean_curvature_inversion_check(S, Invert(np.array([0.0, 0.0, 4.0]), 1.0), p)
    assert k == 2
    assert residuals[2] <= 1e-6 < residuals[4]
    assert "selected" in caplog.text
