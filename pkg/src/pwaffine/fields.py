"""Scalar test fields (a smooth corpus and a BV indicator) and the piecewise
affine interpolant of a field on a triangulation frame."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from .mesh import Box, CellKey, TriangulationFrame

__all__ = [
    "AFFINE",
    "AffineField",
    "BV_INDICATOR",
    "FIELD_NAMES",
    "FieldGradientError",
    "GaussianBump",
    "GUARD_FACTOR",
    "InterpolantField",
    "LebesgueGuardError",
    "QuadraticField",
    "SMOOTH",
    "ScalarField",
    "SmoothBump",
    "TriangleIndicator",
    "make_field",
    "smooth_corpus",
]

# Offsets are rejected when a needed vertex sits within this fraction of the
# frame scale r from the discontinuity set of a BV field.
GUARD_FACTOR = 1e-9

AFFINE = "affine"
SMOOTH = "smooth"
BV_INDICATOR = "bv-indicator"

# Radius beyond which exp(-|x|^2) drops below 1e-16; the dropped tail is
# reported through tail_bound.
GAUSSIAN_SUPPORT_RADIUS = math.sqrt(16.0 * math.log(10.0))


class LebesgueGuardError(RuntimeError):
    """A needed vertex is too close to the discontinuity set of a BV field;
    the caller should resample the frame offset."""


class FieldGradientError(ValueError):
    """A pointwise gradient was requested from a field that has none."""


class ScalarField:
    """Evaluation contract shared by the corpus.

    value/gradient accept arrays of shape (..., n) and return shapes (...)
    and (..., n); a bare (n,) point returns scalars.  singular_distance is
    +inf except for BV fields.
    """

    smoothness = SMOOTH

    def __init__(self, dim: int, support: Box, name: str) -> None:
        self.dim = dim
        self.support = support
        self.name = name

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"

    @property
    def has_gradient(self) -> bool:
        return self.smoothness != BV_INDICATOR

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = self._values(x.reshape(-1, self.dim))
        return float(out[0]) if x.ndim == 1 else out.reshape(x.shape[:-1])

    def gradient(self, x):
        if not self.has_gradient:
            raise FieldGradientError(f"{self.name} has no pointwise gradient")
        x = np.asarray(x, dtype=float)
        out = self._gradients(x.reshape(-1, self.dim))
        return out[0] if x.ndim == 1 else out.reshape(x.shape)

    def singular_distance(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1] if x.ndim > 1 else ()
        out = np.full(shape, np.inf)
        return float("inf") if x.ndim == 1 else out

    def tail_bound(self, exponent: float, which: str = "gradient") -> float:
        """Integral of |Du|^p (or |u|^q) outside the support box; 0 for
        genuinely compact support."""
        return 0.0

    def _values(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _gradients(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class AffineField(ScalarField):
    """c + l[x]; interpolation reproduces it exactly on every frame."""

    smoothness = AFFINE

    def __init__(self, slope, offset: float = 0.0, support: Box | None = None,
                 name: str | None = None) -> None:
        slope = np.array(slope, dtype=float).reshape(-1)
        dim = slope.shape[0]
        if support is None:
            support = Box([-1.0] * dim, [1.0] * dim)
        if name is None:
            name = "constant" if not slope.any() else "affine"
        super().__init__(dim, support, name)
        slope.setflags(write=False)
        self.slope = slope
        self.offset = float(offset)

    def _values(self, pts):
        return self.offset + pts @ self.slope

    def _gradients(self, pts):
        return np.broadcast_to(self.slope, pts.shape).copy()


class QuadraticField(ScalarField):
    """x^T Q x + l[x] + c, defaulting to |x|^2."""

    def __init__(self, dim: int, quad=None, linear=None, offset: float = 0.0,
                 support: Box | None = None) -> None:
        q = np.eye(dim) if quad is None else np.array(quad, dtype=float)
        l = np.zeros(dim) if linear is None else np.array(linear, dtype=float)
        if support is None:
            support = Box([-1.0] * dim, [1.0] * dim)
        super().__init__(dim, support, "quadratic")
        self._qsym = q + q.T
        self._qsym.setflags(write=False)
        q.setflags(write=False)
        l.setflags(write=False)
        self.quad = q
        self.linear = l
        self.offset = float(offset)

    def _values(self, pts):
        return np.einsum("mi,ij,mj->m", pts, self.quad, pts) + pts @ self.linear + self.offset

    def _gradients(self, pts):
        return pts @ self._qsym.T + self.linear


class GaussianBump(ScalarField):
    """exp(-|x|^2), truncated to the box where it exceeds 1e-16."""

    def __init__(self, dim: int) -> None:
        rr = GAUSSIAN_SUPPORT_RADIUS
        super().__init__(dim, Box([-rr] * dim, [rr] * dim), "gaussian")

    def _values(self, pts):
        return np.exp(-(pts**2).sum(axis=1))

    def _gradients(self, pts):
        return -2.0 * pts * np.exp(-(pts**2).sum(axis=1))[:, None]

    def tail_bound(self, exponent: float, which: str = "gradient") -> float:
        rr = GAUSSIAN_SUPPORT_RADIUS
        n = self.dim
        surface = 2.0 if n == 1 else (2.0 * math.pi if n == 2 else 4.0 * math.pi)
        if which == "gradient":
            integrand = lambda s: (2.0 * s) ** exponent * s ** (n - 1) * math.exp(-exponent * s * s)
        else:
            integrand = lambda s: s ** (n - 1) * math.exp(-exponent * s * s)
        val, _ = quad(integrand, rr, rr + 12.0)
        return surface * val


class SmoothBump(ScalarField):
    """Compactly supported bump exp(1 - 1/(1 - |x|^2)) on the unit ball."""

    def __init__(self, dim: int) -> None:
        super().__init__(dim, Box([-1.0] * dim, [1.0] * dim), "smooth_bump")

    def _values(self, pts):
        r2 = (pts**2).sum(axis=1)
        out = np.zeros_like(r2)
        inside = r2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    def _gradients(self, pts):
        r2 = (pts**2).sum(axis=1)
        out = np.zeros_like(pts)
        # Stay strictly inside: nearer the boundary the value underflows to 0.
        inside = r2 < 1.0 - 1e-9
        g = 1.0 - r2[inside]
        out[inside] = pts[inside] * (-2.0 * np.exp(1.0 - 1.0 / g) / g**2)[:, None]
        return out


class TriangleIndicator(ScalarField):
    """Indicator of the closed triangle with vertices (0,0), (0,1), (1,0)."""

    smoothness = BV_INDICATOR

    def __init__(self) -> None:
        super().__init__(2, Box([0.0, 0.0], [1.0, 1.0]), "indicator_triangle")
        corners = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        corners.setflags(write=False)
        self.corners = corners

    def _values(self, pts):
        inside = (pts[:, 0] >= 0.0) & (pts[:, 1] >= 0.0) & (pts.sum(axis=1) <= 1.0)
        return inside.astype(float)

    def singular_distance(self, x):
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, 2)
        edges = [(0, 1), (0, 2), (1, 2)]
        d = np.full(pts.shape[0], np.inf)
        for i, j in edges:
            d = np.minimum(d, _segment_distance(pts, self.corners[i], self.corners[j]))
        return float(d[0]) if x.ndim == 1 else d.reshape(x.shape[:-1])

    def exact_total_variation(self) -> float:
        """Perimeter of the triangle: the total variation of the indicator."""
        c = self.corners
        return float(
            np.hypot(*(c[1] - c[0])) + np.hypot(*(c[2] - c[1])) + np.hypot(*(c[0] - c[2]))
        )


def _segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    t = np.clip((pts - a) @ ab / (ab @ ab), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.sqrt(((pts - proj) ** 2).sum(axis=1))


# -- corpus registry ----------------------------------------------------------

DEFAULT_SLOPE = (1.0, -0.5, 0.25)

FIELD_NAMES = ("constant", "affine", "quadratic", "gaussian", "smooth_bump", "indicator_triangle")


def make_field(name: str, dim: int) -> ScalarField:
    """Construct a corpus field by name."""
    if name == "constant":
        return AffineField(np.zeros(dim), offset=1.0)
    if name == "affine":
        return AffineField(DEFAULT_SLOPE[:dim], offset=0.3)
    if name == "quadratic":
        return QuadraticField(dim)
    if name == "gaussian":
        return GaussianBump(dim)
    if name == "smooth_bump":
        return SmoothBump(dim)
    if name == "indicator_triangle":
        if dim != 2:
            raise ValueError("the triangle indicator is a planar field")
        return TriangleIndicator()
    raise ValueError(f"unknown field {name!r}; choose from {FIELD_NAMES}")


def smooth_corpus(dim: int) -> list[ScalarField]:
    """The smooth sweep corpus: constant, affine, quadratic, Gaussian bump."""
    return [make_field(name, dim) for name in ("constant", "affine", "quadratic", "gaussian")]


# -- the interpolant -----------------------------------------------------------


class InterpolantField:
    """Piecewise affine interpolant of a source field on a frame.

    The restriction to every cell is affine and the value at every lattice
    vertex equals the source value there.  Vertex values are cached keyed by
    integer lattice coordinates; writes are idempotent, so concurrent
    fill-or-read races are benign (last writer wins with the same value).
    """

    def __init__(self, frame: TriangulationFrame, source: ScalarField,
                 guard_factor: float = GUARD_FACTOR) -> None:
        if source.dim != frame.n:
            raise ValueError("field dimension does not match the frame")
        self.frame = frame
        self.source = source
        self.guard_factor = guard_factor
        self._cache: dict[tuple[int, ...], float] = {}

    def _guard(self, pts: np.ndarray) -> None:
        """Reject vertices on (or within guard distance of) the singular set."""
        if self.source.smoothness != BV_INDICATOR:
            return
        d = self.source.singular_distance(pts)
        tol = self.guard_factor * self.frame.r
        if np.min(d) < tol:
            raise LebesgueGuardError(
                f"vertex within {tol:.3e} of the discontinuity set; resample the offset"
            )

    def vertex_value(self, lattice) -> float:
        key = tuple(int(v) for v in lattice)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        pt = self.frame.vertex_point(key)
        self._guard(pt[None, :])
        val = float(self.source.value(pt))
        self._cache[key] = val
        return val

    def vertex_values(self, lattice: np.ndarray) -> np.ndarray:
        """Batch vertex values for an (m, n) integer lattice array."""
        lattice = np.asarray(lattice, dtype=int)
        out = np.empty(lattice.shape[0])
        missing = []
        rows = []
        for row, key in enumerate(map(tuple, lattice.tolist())):
            hit = self._cache.get(key)
            if hit is None:
                missing.append(key)
                rows.append(row)
            else:
                out[row] = hit
        if missing:
            pts = self.frame.vertex_point(np.asarray(missing, dtype=float))
            self._guard(pts)
            vals = np.atleast_1d(self.source.value(pts))
            for key, row, val in zip(missing, rows, vals):
                self._cache[key] = out[row] = float(val)
        return out

    def grid_vertex_values(self, lattice_lo: np.ndarray, shape) -> np.ndarray:
        """Vertex values on the full lattice grid lo .. lo+shape-1 (bulk path).

        Evaluates each vertex exactly once per call and bypasses the scalar
        cache; the guard applies to the whole grid.
        """
        axes = [np.arange(lo, lo + c) for lo, c in zip(lattice_lo, shape)]
        grid = np.meshgrid(*axes, indexing="ij")
        lattice = np.stack([g.ravel() for g in grid], axis=1).astype(float)
        pts = self.frame.vertex_point(lattice)
        self._guard(pts)
        return np.asarray(self.source.value(pts), dtype=float).reshape(tuple(shape))

    def value(self, x):
        """Interpolant value sum_i u(a_i) beta_i(x) on the cell containing x."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x.reshape(-1, self.frame.n)
        n = self.frame.n
        k, f = self.frame._split(pts)
        order = np.argsort(-f, axis=1, kind="stable")
        g = np.take_along_axis(f, order, axis=1)  # descending fractional parts
        beta = np.empty((pts.shape[0], n + 1))
        beta[:, 0] = 1.0 - g[:, 0]
        beta[:, 1:n] = g[:, : n - 1] - g[:, 1:]
        beta[:, n] = g[:, n - 1]
        # Vertex j of the cell adds the unit steps of the first j sorted axes.
        steps = np.zeros((pts.shape[0], n, n), dtype=int)
        np.put_along_axis(steps, order[:, :, None], 1, axis=2)
        cum = np.cumsum(steps, axis=1)
        total = beta[:, 0] * self.vertex_values(k)
        for j in range(1, n + 1):
            total = total + beta[:, j] * self.vertex_values(k + cum[:, j - 1, :])
        return float(total[0]) if single else total.reshape(x.shape[:-1])

    def cell_gradient(self, key: CellKey) -> np.ndarray:
        """Constant gradient sum_i u(a_i) D(beta_i) on the given cell."""
        perm = tuple(key.perm)
        walk = self.frame.base.walk(perm)
        lattice = np.asarray(key.lattice, dtype=int) + walk.astype(int)
        vals = self.vertex_values(lattice)
        dref = self.frame.base.reference_differentials(perm)
        return (vals @ dref) / self.frame.spacing
