import math

import numpy as np
import pytest

from beltrami.catalog import EXAMPLE_IDS, get_example
from beltrami.fields import (Guard, GuardViolation, ScalarField, VectorField, curl, divergence, fd_curl,
                             fd_curl_order4, gradient, helicity_density, laplacian, sample_points)

B0 = VectorField(["sin(z)", "cos(z)", "0"])


def test_gradient_of_z():
    assert np.allclose(gradient(ScalarField("z"))([(0.3, 0.1, 2.0)]), [[0, 0, 1]])


def test_gradient_of_eikonal_theta():
    g = gradient(ScalarField("exp(x+y)/sqrt(2)"))
    p = np.array([[0.2, -0.4, 0.9]])
    v = math.exp(-0.2) / math.sqrt(2)
    assert np.allclose(g(p), [[v, v, 0]], rtol=1e-15)
    assert np.linalg.norm(g(p)) == pytest.approx(math.exp(-0.2), rel=1e-15)


def test_gradient_of_angle():
    g = gradient(ScalarField("atan2(y, x)"))
    assert np.allclose(g([(1, 1, 0)]), [[-0.5, 0.5, 0]], atol=1e-15)


def test_curl_of_b0_is_b0():
    p = sample_points(50, ((-2, 2),) * 3)
    assert np.array_equal(curl(B0)(p), B0(p))


def test_curl_of_gradient_vanishes():
    w = gradient(ScalarField("x^2+y^2+z^2"))
    assert np.all(curl(w)(sample_points(20, ((-1, 1),) * 3)) == 0)


def test_curl_of_abc_equals_field():
    w = get_example("abc").field
    p = sample_points(50, ((-3, 3),) * 3)
    assert np.max(np.abs(curl(w)(p) - w(p))) <= 1e-15


def test_divergences():
    p = sample_points(20, ((-1, 1),) * 3)
    assert np.all(divergence(B0)(p) == 0)
    assert np.allclose(divergence(VectorField(["x", "y", "z"]))(p), 3)
    ex2 = get_example("ex2")
    q = ex2.samples(50)
    r = np.hypot(q[:, 0], q[:, 1])
    assert np.allclose(divergence(ex2.field)(q), np.cos(np.arctan2(q[:, 1], q[:, 0])) / r, rtol=1e-13)


def test_laplacians():
    p = sample_points(10, ((0.1, 1),) * 3)
    assert np.max(np.abs(laplacian(ScalarField("exp(x)*sin(y)"))(p))) <= 1e-14
    assert np.allclose(laplacian(ScalarField("x^2"))(p), 2)
    assert np.max(np.abs(laplacian(ScalarField("log(sqrt(x^2+y^2))"))(p))) <= 1e-13


@pytest.mark.parametrize("eid", [i for i in EXAMPLE_IDS])
def test_curl_grad_and_div_curl_vanish(eid):
    e = get_example(eid)
    p = e.samples(200)
    assert np.max(np.abs(divergence(curl(e.field))(p))) <= 1e-12
    if e.triple is not None:
        for f in (*e.triple.coordinates(), e.triple.L_theta()):
            assert np.max(np.abs(curl(gradient(f))(p))) <= 1e-12


def test_fd_curl_on_b0():
    assert np.allclose(fd_curl(B0, (0, 0, 1), 1e-4), [math.sin(1), math.cos(1), 0], atol=1e-8)


def test_fd_curl_constant_field():
    assert np.allclose(fd_curl(VectorField(["1", "2", "3"]), (0.4, 0.1, -2)), 0, atol=1e-12)


def test_fd_curl_ex5_matches_symbolic():
    w = get_example("ex5").field
    assert np.allclose(fd_curl(w, (0, 0, 0), 1e-4), curl(w)([(0, 0, 0)])[0], atol=1e-7)


def test_fd_curl_second_order_convergence():
    w = get_example("ex5").field
    p = (0.2, 0.3, -0.1)
    exact = curl(w)([p])[0]
    e1 = np.max(np.abs(fd_curl(w, p, 1e-3) - exact))
    e2 = np.max(np.abs(fd_curl(w, p, 5e-4) - exact))
    assert 3.2 <= e1 / e2 <= 4.8
    assert np.max(np.abs(fd_curl_order4(w, p) - exact)) < e1


def test_fd_curl_respects_guard():
    w = get_example("ex1").field
    with pytest.raises(GuardViolation):
        fd_curl(w, (0.05, 0.0, 0.0), 1e-2)


def test_helicity_examples():
    assert helicity_density(B0, (0.3, -2, 1.1)) == pytest.approx(1.0, abs=1e-15)
    assert helicity_density(gradient(ScalarField("x*y*z")), (0.3, 0.2, 0.1)) == 0.0
    assert helicity_density(get_example("ex1").field, (1, 0, 0)) == pytest.approx(-1.0, rel=1e-14)


def test_guard_parsing_and_masking():
    g = Guard("sqrt(x^2+y^2) >= 0.5 and z < 1")
    p = np.array([[1, 0, 0], [0.1, 0, 0], [1, 0, 2]])
    assert g.mask(p).tolist() == [True, False, False]
    with pytest.raises(GuardViolation):
        g.enforce(p)
    assert (g & Guard()).text == g.text
    with pytest.raises(ValueError):
        Guard("x")


def test_field_evaluation_checks_guard():
    f = ScalarField("log(x)", "x > 0")
    assert f([(1, 0, 0)])[0] == 0.0
    with pytest.raises(GuardViolation):
        f([(-1, 0, 0)])


def test_sampling_is_seeded(monkeypatch):
    a = sample_points(10, ((-1, 1),) * 3, seed=3)
    assert np.array_equal(a, sample_points(10, ((-1, 1),) * 3, seed=3))
    monkeypatch.setenv("BELTRAMI_SEED", "3")
    assert np.array_equal(a, sample_points(10, ((-1, 1),) * 3))
