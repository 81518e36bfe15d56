"""Simplex primitives: signed volume, barycentric coordinates and their
differentials, and Minkowski gauges for simplices and balls."""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DegenerateSimplexError",
    "NONDEGENERACY_FLOOR",
    "Simplex",
    "gauge_ball",
    "signed_volume",
]

# Simplices with |signed volume| below this fraction of diam^n are rejected.
NONDEGENERACY_FLOOR = 1e-12


class DegenerateSimplexError(ValueError):
    """The vertex set spans (numerically) no n-dimensional volume."""


def signed_volume(vertices) -> float:
    """Signed volume ``det[a_1 - a_0, ..., a_n - a_0] / n!``.

    Accepts any (n+1, n) vertex array.  Degenerate inputs return 0.0 rather
    than raising, so this doubles as a nondegeneracy probe.
    """
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1] + 1:
        raise ValueError(f"need n+1 vertices in R^n, got array of shape {v.shape}")
    return float(np.linalg.det(v[1:] - v[0]) / math.factorial(v.shape[1]))


class Simplex:
    """A nondegenerate n-simplex spanned by n+1 vertices in R^n.

    The (n+1)x(n+1) vertex system [[1, ..., 1], [a_0, ..., a_n]] is inverted
    once at construction; barycentric coordinates of any point are then a
    single matrix product.  The cost amortizes over the many quadrature
    points evaluated per simplex.
    """

    __slots__ = ("vertices", "dim", "signed_volume", "volume", "diameter", "_minv")

    def __init__(self, vertices) -> None:
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] + 1:
            raise ValueError(f"need n+1 vertices in R^n, got array of shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("simplex vertices must be finite")
        n = v.shape[1]
        if n < 1:
            raise ValueError("ambient dimension must be at least 1")
        diffs = v[:, None, :] - v[None, :, :]
        diam = float(np.sqrt((diffs**2).sum(axis=-1)).max())
        vol = float(np.linalg.det(v[1:] - v[0]) / math.factorial(n))
        if abs(vol) <= NONDEGENERACY_FLOOR * diam**n:
            raise DegenerateSimplexError(
                f"|signed volume| {abs(vol):.3e} is below the floor for diameter {diam:.3e}"
            )
        m = np.vstack([np.ones((1, n + 1)), v.T])
        self._minv = np.linalg.inv(m)
        self._minv.setflags(write=False)
        v.setflags(write=False)
        self.vertices = v
        self.dim = n
        self.signed_volume = vol
        self.volume = abs(vol)
        self.diameter = diam

    def __repr__(self) -> str:
        return f"Simplex(dim={self.dim}, volume={self.volume:.6g})"

    def barycentric(self, x) -> np.ndarray:
        """Barycentric coordinates of x: shape (..., n+1) for x of shape (..., n).

        The result satisfies sum(beta) = 1 and sum(beta_i a_i) = x up to
        solver roundoff.
        """
        x = np.asarray(x, dtype=float)
        pad = np.concatenate([np.ones(x.shape[:-1] + (1,)), x], axis=-1)
        return pad @ self._minv.T

    def barycentric_differentials(self) -> np.ndarray:
        """Constant covectors D(beta_i), one per row; the rows sum to 0."""
        return self._minv[:, 1:]

    def gauge(self, i: int, x) -> float | np.ndarray:
        """Minkowski gauge about vertex i, equal to 1 - beta_i(x).

        Finite everywhere; it agrees with the true gauge on the cone from
        vertex i over the opposite facet, which contains the simplex.  The
        value is <= 1 exactly on the closure of the simplex within that cone.
        """
        out = 1.0 - self.barycentric(x)[..., i]
        return float(out) if np.ndim(out) == 0 else out

    def contains(self, x, tol: float = 1e-12):
        """True where every barycentric coordinate is >= -tol."""
        b = self.barycentric(x)
        out = np.min(b, axis=-1) >= -tol
        return bool(out) if np.ndim(out) == 0 else out

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def opposite_facet(self, i: int) -> np.ndarray:
        """Vertices of the facet opposite vertex i, shape (n, n)."""
        if not 0 <= i <= self.dim:
            raise ValueError(f"vertex index {i} out of range for dim {self.dim}")
        return np.delete(self.vertices, i, axis=0)


def gauge_ball(center, radius: float, x) -> float | np.ndarray:
    """Minkowski gauge of the ball B(center, radius): |x - center| / radius."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    c = np.asarray(center, dtype=float)
    xx = np.asarray(x, dtype=float)
    out = np.sqrt(((xx - c) ** 2).sum(axis=-1)) / radius
    return float(out) if np.ndim(out) == 0 else out
