import numpy as np
import pytest

from pwaffine.geometry import (
    DegenerateSimplexError,
    Simplex,
    gauge_ball,
    signed_volume,
)

from oracles import fd_gradient


UNIT_TRIANGLE = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]


def random_simplex_vertices(rng, n, attempts=100):
    for _ in range(attempts):
        v = rng.uniform(-1.0, 1.0, (n + 1, n))
        if abs(signed_volume(v)) > 0.05:
            return v
    raise AssertionError("could not draw a well-conditioned simplex")


# -- signed volume -------------------------------------------------------------


def test_signed_volume_unit_triangle():
    assert signed_volume(UNIT_TRIANGLE) == 0.5


def test_signed_volume_collinear_is_zero():
    assert signed_volume([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]) == 0.0


def test_signed_volume_kuhn_cell_3d():
    # det [[1,0,0],[1,1,0],[1,1,1]] = 1, so the volume is 1/3! = 1/6
    cell = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1]]
    assert signed_volume(cell) == pytest.approx(1.0 / 6.0, abs=1e-15)


def test_signed_volume_shape_mismatch():
    with pytest.raises(ValueError):
        signed_volume([[0.0, 0.0], [1.0, 0.0]])


def test_degenerate_simplex_rejected():
    with pytest.raises(DegenerateSimplexError):
        Simplex([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])


def test_simplex_requires_finite_vertices():
    with pytest.raises(ValueError):
        Simplex([[0.0, 0.0], [np.inf, 0.0], [0.0, 1.0]])


# -- barycentric coordinates -----------------------------------------------------


def test_barycentric_at_vertices_is_unit_vector():
    s = Simplex(UNIT_TRIANGLE)
    for j in range(3):
        b = s.barycentric(s.vertices[j])
        assert np.allclose(b, np.eye(3)[j], atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_barycentric_centroid(n, rng):
    s = Simplex(random_simplex_vertices(rng, n))
    b = s.barycentric(s.centroid())
    assert np.allclose(b, 1.0 / (n + 1), atol=1e-12)


def test_barycentric_frozen_point():
    # solving the vertex system for (0.25, 0.5) on the unit triangle
    s = Simplex(UNIT_TRIANGLE)
    assert np.allclose(s.barycentric([0.25, 0.5]), [0.25, 0.25, 0.5], atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_barycentric_reconstructs_points(n, rng):
    for _ in range(50):
        s = Simplex(random_simplex_vertices(rng, n))
        x = rng.uniform(-2.0, 2.0, n)
        b = s.barycentric(x)
        assert b.sum() == pytest.approx(1.0, abs=1e-12)
        rebuilt = b @ s.vertices
        assert np.allclose(rebuilt, x, rtol=1e-12, atol=1e-12)


def test_barycentric_batch_shape():
    s = Simplex(UNIT_TRIANGLE)
    pts = np.zeros((4, 5, 2))
    assert s.barycentric(pts).shape == (4, 5, 3)


# -- barycentric differentials ----------------------------------------------------


def test_differentials_interval():
    a, b = -0.4, 1.1
    s = Simplex([[a], [b]])
    d = s.barycentric_differentials()
    assert np.allclose(d, [[-1.0 / (b - a)], [1.0 / (b - a)]], rtol=1e-14)


def test_differentials_unit_triangle():
    d = Simplex(UNIT_TRIANGLE).barycentric_differentials()
    assert np.allclose(d, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]], atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_differentials_sum_to_zero(n, rng):
    s = Simplex(random_simplex_vertices(rng, n))
    assert np.allclose(s.barycentric_differentials().sum(axis=0), 0.0, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_differentials_pair_edges(n, rng):
    # D(beta_i)[a_j - a_k] = delta_ij - delta_ik
    s = Simplex(random_simplex_vertices(rng, n))
    d = s.barycentric_differentials()
    for i in range(n + 1):
        for j in range(n + 1):
            for k in range(n + 1):
                expect = (1.0 if i == j else 0.0) - (1.0 if i == k else 0.0)
                got = d[i] @ (s.vertices[j] - s.vertices[k])
                assert got == pytest.approx(expect, abs=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_differentials_match_finite_differences(n, rng):
    s = Simplex(random_simplex_vertices(rng, n))
    d = s.barycentric_differentials()
    x = rng.uniform(-0.5, 0.5, n)
    for i in range(n + 1):
        fd = fd_gradient(lambda y: float(s.barycentric(y)[i]), x, step=1e-6)
        assert np.allclose(fd, d[i], atol=1e-6)


# -- gauges ------------------------------------------------------------------------


def test_gauge_vanishes_at_base_vertex():
    s = Simplex(UNIT_TRIANGLE)
    for i in range(3):
        assert s.gauge(i, s.vertices[i]) == pytest.approx(0.0, abs=1e-14)


def test_gauge_is_one_on_opposite_facet(rng):
    s = Simplex(random_simplex_vertices(rng, 2))
    facet = s.opposite_facet(0)
    t = rng.uniform(0.0, 1.0)
    x = (1 - t) * facet[0] + t * facet[1]
    assert s.gauge(0, x) == pytest.approx(1.0, abs=1e-12)


def test_gauge_centroid_two_thirds():
    s = Simplex(UNIT_TRIANGLE)
    assert s.gauge(0, s.centroid()) == pytest.approx(2.0 / 3.0, abs=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_gauge_inside_at_most_one_outside_greater(n, rng):
    s = Simplex(random_simplex_vertices(rng, n))
    for i in range(n + 1):
        # random convex combinations stay in the closed simplex
        w = rng.dirichlet(np.ones(n + 1))
        inside = w @ s.vertices
        assert s.gauge(i, inside) <= 1.0 + 1e-12
        # points past the opposite facet along a cone ray have gauge > 1
        facet_point = np.delete(w, i) / np.delete(w, i).sum() @ s.opposite_facet(i)
        outside = s.vertices[i] + 1.5 * (facet_point - s.vertices[i])
        assert s.gauge(i, outside) > 1.0


@pytest.mark.parametrize("lam", [0.25, 0.5, 2.0, 7.5])
def test_gauge_positive_homogeneity(lam, rng):
    s = Simplex(random_simplex_vertices(rng, 2))
    x = rng.uniform(-1.0, 1.0, 2)
    for i in range(3):
        a = s.vertices[i]
        scaled = a + lam * (x - a)
        assert s.gauge(i, scaled) == pytest.approx(lam * s.gauge(i, x), rel=1e-10, abs=1e-12)


def test_gauge_ball_cases():
    assert gauge_ball([0.0, 0.0], 2.0, [0.0, 0.0]) == 0.0
    assert gauge_ball([0.0, 0.0], 2.0, [1.0, 0.0]) == 0.5
    assert gauge_ball([1.0], 0.5, [1.5]) == pytest.approx(1.0, abs=1e-15)


def test_gauge_ball_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        gauge_ball([0.0], 0.0, [1.0])
