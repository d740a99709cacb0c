import math

import numpy as np
import pytest

from beltrami import expr as ex
from beltrami.catalog import get_example
from beltrami.fields import ScalarField, curl, gradient, sample_points
from beltrami.frames import (CHARTS, ConditionError, JacobianSignError, OrthoTriple, ZeroCrossingError,
                             build_beltrami, build_beltrami_profile, build_beltrami_ratio, catalog_chart,
                             check_construction_conditions, check_representation_conditions,
                             harmonic_conjugate, planar_frame, tangent_identity_residual)
from beltrami.verify import eigenvalue_residual

TRIPLE_IDS = ["b0", "ex1", "ex2", "ex3", "ex4", "ex5", "ex6", "ex7", "ex8"]
CUBE = ((-1, 1),) * 3


def cartesian(ell="x", psi="y", theta="z"):
    return OrthoTriple(ScalarField(ell), ScalarField(psi), ScalarField(theta), box=CUBE)


def test_ex5_triple_satisfies_the_system():
    t = get_example("ex5").triple
    rep = check_construction_conditions(t, "exp(x+y)")
    assert rep.ok and max(rep.residuals.values()) <= 1e-13


def test_cartesian_triple_satisfies_the_system():
    rep = check_construction_conditions(cartesian(), "1")
    assert all(v == 0 for v in rep.residuals.values())


def test_unequal_scales_detected():
    rep = check_construction_conditions(cartesian(psi="2*y"), "1")
    assert rep.residuals["|grad ell|-|grad psi|"] == pytest.approx(1.0)
    assert not rep.passed["|grad ell|-|grad psi|"]
    assert rep.worst_points["|grad ell|-|grad psi|"] is not None


def test_representation_conditions():
    assert check_representation_conditions(get_example("ex8").triple).ok
    assert check_representation_conditions(get_example("ex5").triple).ok
    p = np.array([[0.1, 0.2, math.pi / 4]] * 9)
    rep = check_representation_conditions(cartesian(psi="2*y"), p)
    assert rep.residuals["(a) angle balance"] == pytest.approx(1.5)
    assert not rep.ok


@pytest.mark.parametrize("eid", TRIPLE_IDS)
def test_construction_reproduces_catalog(eid):
    e = get_example(eid)
    c = build_beltrami(e.triple)
    p = e.samples(200)
    assert np.max(np.abs(c.w(p) - e.field(p))) <= 1e-13
    assert eigenvalue_residual(c.w, c.factor, p) <= 1e-10
    assert eigenvalue_residual(c.w_star, c.factor_star, p) <= 1e-10
    assert np.max(np.abs(c.factor(p) - e.expected_hhat(p)) / (1 + np.abs(e.expected_hhat(p)))) <= 1e-10


def test_swapped_cartesian_triple_has_negative_sign():
    c = build_beltrami(cartesian(ell="y", psi="x", theta="z"))
    assert c.sigma == -1
    p = sample_points(20, CUBE)
    assert np.allclose(c.w(p), np.column_stack([np.cos(p[:, 2]), np.sin(p[:, 2]), 0 * p[:, 2]]))
    assert np.allclose(c.factor(p), -1) and np.allclose(c.factor_star(p), 1)
    assert eigenvalue_residual(c.w, -1.0 * ScalarField("1"), p) <= 1e-15
    assert eigenvalue_residual(c.w_star, "1", p) <= 1e-15


def test_sign_hint_contradiction():
    t = cartesian()
    t.jacobian_sign_hint = -1
    with pytest.raises(JacobianSignError):
        build_beltrami(t)


def test_sign_change_is_rejected():
    t = OrthoTriple(ScalarField("x"), ScalarField("y"), ScalarField("z^2"), box=CUBE)
    with pytest.raises(JacobianSignError):
        build_beltrami(t)


def test_sign_needs_nine_points():
    with pytest.raises(ValueError):
        build_beltrami(cartesian(), points=sample_points(4, CUBE))


@pytest.mark.parametrize("F, factor", [("s", "1"), ("2*s", "2"), ("s^2/2", "z")])
def test_profile_construction(F, factor):
    t = cartesian()
    c = build_beltrami_profile(t, F)
    p = sample_points(100, ((-1, 1), (-1, 1), (0.1, 1)))
    assert np.allclose(c.factor(p), ScalarField(factor)(p), rtol=1e-14)
    assert eigenvalue_residual(c.w, c.factor, p) <= 1e-10
    assert eigenvalue_residual(c.w_star, c.factor_star, p) <= 1e-10


def test_profile_identity_reduces_to_plain_construction():
    t = get_example("ex5").triple
    a, b = build_beltrami(t), build_beltrami_profile(t, "s")
    p = t.samples(30)
    assert np.max(np.abs(a.w(p) - b.w(p))) <= 1e-15


def test_ratio_with_linear_profile():
    c = build_beltrami_ratio("x", "y", "z", "s")
    p = sample_points(100, CUBE)
    assert np.allclose(c.factor(p), 1 / (1 + p[:, 2] ** 2), rtol=1e-14)
    assert eigenvalue_residual(c.w, c.factor, p) <= 1e-10


def test_ratio_with_zero_profile_is_a_gradient():
    c = build_beltrami_ratio("x", "y", "z", "0")
    p = sample_points(20, CUBE)
    assert np.allclose(c.w(p), [[0, 1, 0]]) and np.all(c.factor(p) == 0)
    assert np.all(curl(c.w)(p) == 0)


def test_ratio_with_tangent_matches_plain_construction():
    # on z in (-1, 1) the tangent stays finite and atan(tan z) = z
    t = cartesian()
    r = build_beltrami_ratio("x", "y", "z", "sin(s)/cos(s)")
    c = build_beltrami(t)
    p = sample_points(50, CUBE)
    assert np.max(np.abs(r.w(p) - c.w(p))) <= 1e-14
    assert np.max(np.abs(r.factor(p) - c.factor(p))) <= 1e-13


def test_ratio_rejects_non_orthogonal_input():
    with pytest.raises(ConditionError):
        build_beltrami_ratio("x", "x+y", "z", "s")


def test_planar_ex5_closed_form_and_quadrature():
    n = np.array([1, 1, 0]) / math.sqrt(2)
    p = sample_points(200, CUBE)
    target = np.exp(p[:, 0] + p[:, 1]) / math.sqrt(2)
    closed = planar_frame(n, "exp(sqrt(2)*s)", "exp(sqrt(2)*s)/sqrt(2)")
    assert np.max(np.abs(closed.theta(p) - target)) <= 1e-13 * np.max(target)
    quad = planar_frame(n, "exp(sqrt(2)*s)", theta_at_zero=1 / math.sqrt(2))
    assert np.max(np.abs(quad.theta(p) - target)) <= 1e-8
    assert check_construction_conditions(quad, quad.alpha, p).ok
    assert max(check_construction_conditions(closed, closed.alpha, p).residuals.values()) <= 1e-12


def test_planar_ex6_needs_sign_change_permission():
    n = np.array([1, -1, 0]) / math.sqrt(2)
    with pytest.raises(ZeroCrossingError):
        planar_frame(n, "cos(sqrt(2)*s)")
    t = planar_frame(n, "cos(sqrt(2)*s)", on_sign_change="allow")
    assert t.notes["sign_changes"]
    p = sample_points(200, CUBE)
    assert np.max(np.abs(t.theta(p) - np.sin(p[:, 0] - p[:, 1]) / math.sqrt(2))) <= 1e-8


def test_planar_axis_normal_recovers_cartesian_angle():
    t = planar_frame((0, 0, 1), "1", "s")
    p = sample_points(20, CUBE)
    assert np.allclose(t.theta(p), p[:, 2])
    assert np.allclose(t.ell(p) ** 2 + t.psi(p) ** 2, p[:, 0] ** 2 + p[:, 1] ** 2)
    assert build_beltrami(t).sigma == 1


def test_planar_frame_is_right_handed():
    for n in [(0, 0, 1), (1, 0, 0), np.array([1, 2, 2]) / 3, np.array([1, 1, 1]) / math.sqrt(3)]:
        t = planar_frame(n, "1", "s")
        e1, e2 = np.array(t.notes["e1"]), np.array(t.notes["e2"])
        assert np.dot(np.cross(e1, e2), n) == pytest.approx(1.0)


def test_planar_rejects_non_unit_normal():
    with pytest.raises(ValueError):
        planar_frame((1, 1, 0), "1", "s")


def test_planar_rejects_wrong_antiderivative():
    with pytest.raises(ValueError):
        planar_frame((0, 0, 1), "cos(s)", "cos(s)")


def test_harmonic_conjugate_exp_sin():
    psi = harmonic_conjugate(ScalarField("exp(x)*sin(y)"))
    p = sample_points(200, ((-1, 1), (-1, 1), (0, 0)))
    expected = -np.exp(p[:, 0]) * np.cos(p[:, 1]) + 1
    assert np.max(np.abs(psi(p) - expected)) <= 1e-8
    g = gradient(psi)(p)
    assert np.allclose(g, np.column_stack([-np.exp(p[:, 0]) * np.cos(p[:, 1]),
                                           np.exp(p[:, 0]) * np.sin(p[:, 1]), 0 * p[:, 0]]), atol=1e-14)


@pytest.mark.parametrize("ell, psi", [("x", "y"), ("x^2 - y^2", "2*x*y")])
def test_harmonic_conjugate_simple(ell, psi):
    got = harmonic_conjugate(ScalarField(ell))
    p = sample_points(50, ((-1, 1), (-1, 1), (0, 0)))
    assert np.max(np.abs(got(p) - ScalarField(psi)(p))) <= 1e-8
    gl, gp = gradient(ScalarField(ell))(p), gradient(got)(p)
    assert np.max(np.abs(np.einsum("ij,ij->i", gl, gp))) <= 1e-8


def test_harmonic_conjugate_rejects_non_harmonic():
    with pytest.raises(ConditionError):
        harmonic_conjugate(ScalarField("x^2"))


def test_harmonic_conjugate_builds_ex8():
    ell = ScalarField("exp(x)*sin(y)")
    t = OrthoTriple(ell, harmonic_conjugate(ell), ScalarField("z"), box=CUBE)
    c = build_beltrami(t)
    e = get_example("ex8")
    p = e.samples(200)
    assert np.max(np.abs(c.w(p) - e.field(p))) <= 1e-13


@pytest.mark.parametrize("name", sorted(CHARTS))
def test_chart_scale_factors(name):
    t = catalog_chart(name)
    p = t.samples(100)
    for q, (label, h) in zip(t.coordinates(), t.scale_factors.items()):
        assert np.allclose(1 / np.linalg.norm(gradient(q)(p), axis=1), ScalarField(h)(p), rtol=1e-12), label


def test_parabolic_cylindrical_scales():
    t = catalog_chart("parabolic_cylindrical")
    p = t.samples(50)
    r = np.hypot(p[:, 0], p[:, 1])
    for q in (t.ell, t.psi):
        assert np.allclose(np.linalg.norm(gradient(q)(p), axis=1), 1 / np.sqrt(2 * r))


def test_unknown_chart():
    with pytest.raises(KeyError):
        catalog_chart("spherical")


@pytest.mark.parametrize("eid", TRIPLE_IDS)
def test_tangent_basis_identity(eid):
    e = get_example(eid)
    assert tangent_identity_residual(e.triple, e.field, e.samples(200)) <= 1e-10
