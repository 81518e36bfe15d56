"""Numerical integration on simplices and balls, including the vertex-cone
substitution that regularizes gauge-power singularities anchored at a vertex.

The cone substitution writes x = a + t(xi - a) with t in (0, 1] the gauge
value and xi on the boundary opposite the base point a, so that

    integral_S f = n vol(S) int_0^1 t^(n-1) avg_xi f(a + t(xi - a)) dt.

Integrands of the form g(t, xi) with g * t^(n-1) bounded as t -> 0 are then
integrated by ordinary Gauss rules with no node at t = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .geometry import Simplex

__all__ = [
    "ConeRule",
    "QuadratureError",
    "SimplexRule",
    "ball_average",
    "ball_cone_average",
    "gauss01",
    "integrate_simplex",
    "integrate_vertex_cone",
    "sphere_rule",
]

# Radial nodes below this would amplify gauge powers past any useful range.
T_FLOOR = 1e-14
# A transformed integrand whose magnitude exceeds this is treated as a blow-up.
OVERFLOW_GUARD = 1e50


class QuadratureError(RuntimeError):
    """Non-finite or overflowing integrand value at a quadrature node."""


def gauss01(m: int) -> tuple[np.ndarray, np.ndarray]:
    """m-point Gauss-Legendre rule on [0, 1]; weights sum to 1."""
    x, w = roots_legendre(m)
    return (x + 1.0) / 2.0, w / 2.0


def _jacobi01(m: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """m-point Gauss-Jacobi rule for the weight (1-u)^alpha on [0, 1]."""
    x, w = roots_jacobi(m, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1.0)


@dataclass(frozen=True)
class SimplexRule:
    """Quadrature rule on a simplex, in barycentric coordinates.

    Weights sum to 1 (the rule is expressed against the normalized measure);
    ``degree`` is the total polynomial degree integrated exactly.
    """

    nodes: np.ndarray  # (m, dim+1) barycentric coordinates
    weights: np.ndarray  # (m,), sum to 1
    degree: int

    def __post_init__(self) -> None:
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1] - 1

    @classmethod
    def conical(cls, dim: int, degree: int) -> "SimplexRule":
        """Conical-product Gauss-Jacobi rule, exact to the requested degree.

        Works in any dimension; dim = 0 is the single-point rule on a vertex.
        The stored degree is the achieved 2m-1 >= degree.
        """
        if dim < 0:
            raise ValueError("dimension must be nonnegative")
        if dim == 0:
            return cls(np.ones((1, 1)), np.ones(1), degree=10**9)
        m = max(1, (degree + 2) // 2)
        axes = [_jacobi01(m, float(dim - j)) for j in range(1, dim + 1)]
        grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
        u = np.stack([g.ravel() for g in grids], axis=1)  # (M, dim)
        wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
        w = np.ones(u.shape[0])
        for g in wgrids:
            w = w * g.ravel()
        # Collapse the cube onto the unit simplex: x_j = u_j * (1 - sum x_<j).
        x = np.empty_like(u)
        rem = np.ones(u.shape[0])
        for j in range(dim):
            x[:, j] = u[:, j] * rem
            rem = rem * (1.0 - u[:, j])
        nodes = np.concatenate([rem[:, None], x], axis=1)  # beta_0 = 1 - sum x
        w = w * math.factorial(dim)  # raw weights sum to vol(T) = 1/dim!
        return cls(nodes, w, degree=2 * m - 1)


def integrate_simplex(f, simplex: Simplex, rule: SimplexRule) -> float:
    """Integrate f over the simplex: vol(S) * sum(w_k f(x_k)).

    f must accept an (m, n) array of points and return (m,) values.
    """
    x = rule.nodes @ simplex.vertices
    vals = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("non-finite integrand value at a quadrature node")
    return simplex.volume * float(vals @ rule.weights)


@dataclass(frozen=True)
class ConeRule:
    """Composite rule for vertex-anchored cone integrals on a simplex.

    Pairs a radial Gauss rule on (0, 1] with a facet rule on the opposite
    (n-1)-face.  Radial weights sum to 1 and facet weights sum to 1, so
    composite weights integrate constants to the simplex volume.
    """

    radial_nodes: np.ndarray
    radial_weights: np.ndarray
    facet: SimplexRule

    def __post_init__(self) -> None:
        if self.radial_nodes.min() < T_FLOOR:
            raise ValueError("radial node underflows the t floor")
        self.radial_nodes.setflags(write=False)
        self.radial_weights.setflags(write=False)

    @classmethod
    def default(cls, dim: int, radial_points: int = 24, facet_degree: int = 16) -> "ConeRule":
        t, w = gauss01(radial_points)
        return cls(t, w, SimplexRule.conical(dim - 1, facet_degree))


def _cone_sum(g, n: int, scale: float, t: np.ndarray, wt: np.ndarray,
              boundary: np.ndarray, wb: np.ndarray) -> float:
    """Common kernel: scale * sum_k w_k t_k^(n-1) sum_m W_m g(t_k, xi_m)."""
    nk, nm = t.shape[0], boundary.shape[0]
    tt = np.repeat(t, nm)
    xx = np.tile(boundary, (nk, 1))
    vals = np.asarray(g(tt, xx), dtype=float).reshape(nk, nm)
    contrib = vals * (t ** (n - 1))[:, None]
    if not np.all(np.isfinite(contrib)) or np.abs(contrib).max() > OVERFLOW_GUARD:
        raise QuadratureError("integrand blow-up detected in cone quadrature")
    return scale * float(wt @ contrib @ wb)


def integrate_vertex_cone(g, simplex: Simplex, i: int, rule: ConeRule) -> float:
    """Integrate over the simplex an integrand given in cone coordinates.

    g(t, xi) is the integrand at x = a_i + t(xi - a_i), with t the gauge
    value about vertex i and xi on the opposite facet; g must accept flat
    arrays (t of shape (m,), xi of shape (m, n)).  Requires g * t^(n-1)
    bounded as t -> 0.
    """
    facet_vertices = simplex.opposite_facet(i)
    xi = rule.facet.nodes @ facet_vertices
    return _cone_sum(
        g, simplex.dim, simplex.dim * simplex.volume,
        rule.radial_nodes, rule.radial_weights, xi, rule.facet.weights,
    )


def sphere_rule(dim: int, degree: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature on the unit sphere S^(dim-1): directions and weights (sum 1).

    Exact for spherical polynomials up to the requested degree: two points in
    dimension 1, equal angles in dimension 2, Gauss-Legendre in cos(theta)
    crossed with equal angles in dimension 3.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if dim == 2:
        m = 2 * max(1, degree)
        theta = 2.0 * np.pi * (np.arange(m) + 0.5) / m
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return dirs, np.full(m, 1.0 / m)
    if dim == 3:
        m = max(1, (degree + 2) // 2)
        u, wu = roots_legendre(m)  # u = cos(theta)
        nphi = 2 * m
        phi = 2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi
        s = np.sqrt(1.0 - u**2)
        dirs = np.stack(
            [
                np.outer(s, np.cos(phi)).ravel(),
                np.outer(s, np.sin(phi)).ravel(),
                np.outer(u, np.ones(nphi)).ravel(),
            ],
            axis=1,
        )
        w = np.outer(wu / 2.0, np.full(nphi, 1.0 / nphi)).ravel()
        return dirs, w
    raise ValueError(f"sphere rule not available in dimension {dim}")


def ball_cone_average(g, center, radius: float, radial_points: int = 24,
                      sphere: tuple[np.ndarray, np.ndarray] | None = None) -> float:
    """Average over the ball of an integrand in cone coordinates about the center.

    g(t, xi) is evaluated at x = center + t(xi - center) with xi = center +
    radius * omega on the boundary sphere; returns the normalized integral,
    n * int_0^1 t^(n-1) avg_omega g dt.
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    c = np.asarray(center, dtype=float)
    n = c.shape[0]
    dirs, wb = sphere if sphere is not None else sphere_rule(n)
    t, wt = gauss01(radial_points)
    boundary = c + radius * dirs
    return _cone_sum(g, n, float(n), t, wt, boundary, wb)


def ball_average(f, center, radius: float, radial_points: int = 24,
                 sphere: tuple[np.ndarray, np.ndarray] | None = None) -> float:
    """Average of f over the ball B(center, radius) by the polar product rule."""
    c = np.asarray(center, dtype=float)

    def g(t, xi):
        return f(c + t[:, None] * (xi - c))

    return ball_cone_average(g, c, radius, radial_points, sphere)
