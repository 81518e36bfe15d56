import itertools

import numpy as np
import pytest

from pwaffine.geometry import Simplex
from pwaffine.quadrature import (
    ConeRule,
    QuadratureError,
    SimplexRule,
    ball_average,
    ball_cone_average,
    gauss01,
    integrate_simplex,
    integrate_vertex_cone,
    sphere_rule,
)

from oracles import barycentric_monomial_integral
from test_geometry import UNIT_TRIANGLE, random_simplex_vertices


def test_gauss01_weights_sum_to_one():
    t, w = gauss01(12)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all((t > 0) & (t < 1))


@pytest.mark.parametrize("n,degree", [(1, 3), (1, 9), (2, 4), (2, 8), (3, 6), (3, 10)])
def test_conical_rule_weights(n, degree):
    rule = SimplexRule.conical(n, degree)
    assert rule.weights.sum() == pytest.approx(1.0, rel=1e-13)
    assert rule.degree >= degree
    # nodes are interior barycentric tuples
    assert np.all(rule.nodes > 0.0)
    assert np.allclose(rule.nodes.sum(axis=1), 1.0, atol=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_conical_exactness_on_monomials(n, rng):
    """Every barycentric monomial up to the rule degree matches the closed form."""
    degree = 7
    rule = SimplexRule.conical(n, degree)
    s = Simplex(random_simplex_vertices(rng, n))
    for total in range(rule.degree + 1):
        for powers in itertools.product(range(total + 1), repeat=n + 1):
            if sum(powers) != total:
                continue
            exact = barycentric_monomial_integral(powers, s)

            def f(x, powers=powers):
                b = s.barycentric(x)
                out = np.ones(x.shape[0])
                for i, p in enumerate(powers):
                    out = out * b[:, i] ** p
                return out

            got = integrate_simplex(f, s, rule)
            assert got == pytest.approx(exact, rel=1e-13, abs=1e-16)


def test_beta_product_on_unit_triangle():
    # int beta_0 beta_1 over the unit triangle = 2 * vol * 1!1!0!/4! = 1/24
    s = Simplex(UNIT_TRIANGLE)
    rule = SimplexRule.conical(2, 2)

    def f(x):
        b = s.barycentric(x)
        return b[:, 0] * b[:, 1]

    assert integrate_simplex(f, s, rule) == pytest.approx(1.0 / 24.0, rel=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_integrate_constant_gives_volume(n, rng):
    s = Simplex(random_simplex_vertices(rng, n))
    rule = SimplexRule.conical(n, 4)
    got = integrate_simplex(lambda x: np.ones(x.shape[0]), s, rule)
    assert got == pytest.approx(s.volume, rel=1e-13)


def test_nonfinite_integrand_raises():
    s = Simplex(UNIT_TRIANGLE)
    rule = SimplexRule.conical(2, 4)
    with pytest.raises(QuadratureError):
        integrate_simplex(lambda x: np.full(x.shape[0], np.nan), s, rule)


# -- vertex cones ------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 3])
def test_cone_constant_gives_volume(n, rng):
    s = Simplex(random_simplex_vertices(rng, n))
    rule = ConeRule.default(n)
    got = integrate_vertex_cone(lambda t, xi: np.ones(t.shape[0]), s, 0, rule)
    assert got == pytest.approx(s.volume, rel=1e-12)


def test_cone_1d_closed_form():
    # u = x^2 on [0,1] anchored at 0: int 2t (0-t)(1/t - 1) dt = -1/3
    s = Simplex([[0.0], [1.0]])
    rule = ConeRule.default(1)

    def g(t, xi):
        return 2.0 * t * (0.0 - t) * (1.0 / t - 1.0)

    got = integrate_vertex_cone(g, s, 0, rule)
    assert got == pytest.approx(-1.0 / 3.0, abs=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_cone_matches_plain_on_smooth_integrands(n, rng):
    rule = ConeRule.default(n)
    plain = SimplexRule.conical(n, 16)
    for _ in range(5):
        s = Simplex(random_simplex_vertices(rng, n))
        i = int(rng.integers(0, n + 1))
        a = s.vertices[i]

        def f(x):
            return np.exp(-(x**2).sum(axis=-1)) + x[:, 0] ** 3

        def g(t, xi):
            return f(a + t[:, None] * (xi - a))

        got = integrate_vertex_cone(g, s, i, rule)
        want = integrate_simplex(f, s, plain)
        assert got == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_scaling_equivariance(n, rng):
    """Integrals scale by lam^n under simplex dilation."""
    lam = 2.0
    v = random_simplex_vertices(rng, n)
    s, s2 = Simplex(v), Simplex(lam * v)
    rule = SimplexRule.conical(n, 6)

    def f(x):
        return x[:, 0] ** 2 + 1.0

    base = integrate_simplex(lambda x: f(x / lam), s2, rule)
    assert base == pytest.approx(lam**n * integrate_simplex(f, s, rule), rel=1e-12)


def test_cone_blowup_guard():
    s = Simplex(UNIT_TRIANGLE)
    rule = ConeRule.default(2)
    with pytest.raises(QuadratureError):
        integrate_vertex_cone(lambda t, xi: t ** (-60.0), s, 0, rule)


# -- sphere and ball rules -----------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sphere_rule_normalized_unit_symmetric(n):
    dirs, w = sphere_rule(n)
    assert w.sum() == pytest.approx(1.0, rel=1e-13)
    assert np.allclose((dirs**2).sum(axis=1), 1.0, atol=1e-12)
    # symmetric rules annihilate odd monomials
    assert np.allclose(w @ dirs, 0.0, atol=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ball_average_closed_forms(n):
    c = np.linspace(0.1, 0.3, n)
    R = 0.7
    one = ball_average(lambda x: np.ones(x.shape[0]), c, R)
    assert one == pytest.approx(1.0, rel=1e-12)
    # affine functions average to the center value
    aff = ball_average(lambda x: 2.0 + x @ np.arange(1.0, n + 1.0), c, R)
    assert aff == pytest.approx(2.0 + c @ np.arange(1.0, n + 1.0), rel=1e-12)
    # mean of |x - c|^2 over the ball is n R^2 / (n + 2)
    sq = ball_average(lambda x: ((x - c) ** 2).sum(axis=1), c, R)
    assert sq == pytest.approx(n * R**2 / (n + 2), rel=1e-12)


def test_ball_cone_average_matches_ball_average():
    c = np.array([0.2, -0.1])
    R = 0.9

    def f(x):
        return np.exp(-(x**2).sum(axis=-1))

    def g(t, xi):
        return f(c + t[:, None] * (xi - c))

    assert ball_cone_average(g, c, R) == pytest.approx(ball_average(f, c, R), rel=1e-14)


def test_ball_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        ball_average(lambda x: np.ones(x.shape[0]), np.zeros(2), 0.0)
