"""Periodic Kuhn (Freudenthal) triangulation of R^n and its translated and
dilated frames, with point location and bounded-region enumeration.

Each lattice cube splits into n! simplices indexed by the descending order of
fractional coordinates; the lattice spacing of the frame at scale r is
sigma * r, with sigma = 1/sqrt(n) so that every cell has diameter r.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Simplex

__all__ = ["BaseTriangulation", "Box", "CellKey", "TriangulationFrame"]

# Fractional coordinates this close to a lattice hyperplane snap onto it, so
# points constructed exactly at vertices locate and interpolate exactly.
SNAP = 1e-12
# Tolerance for including boundary vertices in vertices_in_box.
VERTEX_TOL = 1e-9


class Box:
    """Axis-aligned box [lower, upper] with lower <= upper componentwise."""

    __slots__ = ("lower", "upper")

    def __init__(self, lower, upper) -> None:
        lo = np.array(lower, dtype=float).reshape(-1)
        up = np.array(upper, dtype=float).reshape(-1)
        if lo.shape != up.shape:
            raise ValueError("lower and upper must have the same dimension")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(up))):
            raise ValueError("box corners must be finite")
        if np.any(lo > up):
            raise ValueError("need lower <= upper componentwise")
        lo.setflags(write=False)
        up.setflags(write=False)
        self.lower = lo
        self.upper = up

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def volume(self) -> float:
        return float(np.prod(self.widths()))

    def expand(self, margin: float) -> "Box":
        return Box(self.lower - margin, self.upper + margin)

    def hull(self, other: "Box") -> "Box":
        return Box(np.minimum(self.lower, other.lower), np.maximum(self.upper, other.upper))

    def contains(self, x, tol: float = 0.0):
        x = np.asarray(x, dtype=float)
        ok = np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)
        return bool(ok) if np.ndim(ok) == 0 else ok

    def to_lists(self) -> list[list[float]]:
        return [self.lower.tolist(), self.upper.tolist()]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Box)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __repr__(self) -> str:
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"


@dataclass(frozen=True)
class CellKey:
    """Canonical Kuhn cell index: lattice base point plus an axis permutation."""

    lattice: tuple[int, ...]
    perm: tuple[int, ...]


class BaseTriangulation:
    """Kuhn decomposition of the unit lattice, scaled by sigma.

    The default sigma = 1/sqrt(n) makes every base simplex fit in a cube of
    side sigma, hence of diameter sigma*sqrt(n) = 1.  All cells are images
    under lattice isometries of the n! permutation simplices.
    """

    def __init__(self, n: int, sigma: float | None = None) -> None:
        if n < 1:
            raise ValueError("ambient dimension must be at least 1")
        self.n = n
        self.sigma = float(sigma) if sigma is not None else 1.0 / math.sqrt(n)
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        self.perms: tuple[tuple[int, ...], ...] = tuple(itertools.permutations(range(n)))
        self._walks: dict[tuple[int, ...], np.ndarray] = {}
        self._diffs: dict[tuple[int, ...], np.ndarray] = {}

    def walk(self, perm: tuple[int, ...]) -> np.ndarray:
        """Vertices of the unit Kuhn cell for perm: cumulative unit steps, (n+1, n)."""
        cached = self._walks.get(perm)
        if cached is None:
            self._check_perm(perm)
            w = np.zeros((self.n + 1, self.n))
            for j, axis in enumerate(perm):
                w[j + 1] = w[j]
                w[j + 1, axis] += 1.0
            w.setflags(write=False)
            cached = self._walks[perm] = w
        return cached

    def reference_differentials(self, perm: tuple[int, ...]) -> np.ndarray:
        """Barycentric differentials of the unit Kuhn cell for perm, (n+1, n)."""
        cached = self._diffs.get(perm)
        if cached is None:
            cached = self._diffs[perm] = Simplex(self.walk(perm)).barycentric_differentials()
        return cached

    def _check_perm(self, perm: tuple[int, ...]) -> None:
        if tuple(sorted(perm)) != tuple(range(self.n)):
            raise ValueError(f"{perm} is not a permutation of 0..{self.n - 1}")


class TriangulationFrame:
    """The triangulation { r * Sigma + h : Sigma in the base }, realized as a
    Kuhn lattice of spacing sigma * r shifted by h."""

    def __init__(self, base: BaseTriangulation | int, r: float, h) -> None:
        if isinstance(base, int):
            base = BaseTriangulation(base)
        if not r > 0:
            raise ValueError(f"scale r must be positive, got {r}")
        hv = np.array(h, dtype=float).reshape(-1)
        if hv.shape[0] != base.n:
            raise ValueError("offset dimension does not match the triangulation")
        hv.setflags(write=False)
        self.base = base
        self.n = base.n
        self.r = float(r)
        self.h = hv
        self.spacing = base.sigma * self.r

    def __repr__(self) -> str:
        return f"TriangulationFrame(n={self.n}, r={self.r}, h={self.h.tolist()})"

    def with_offset(self, h) -> "TriangulationFrame":
        return TriangulationFrame(self.base, self.r, h)

    # -- point location -----------------------------------------------------

    def _split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Lattice index and snapped fractional part of (x - h) / spacing."""
        y = (np.asarray(x, dtype=float) - self.h) / self.spacing
        k = np.floor(y)
        f = y - k
        carry = f >= 1.0 - SNAP
        k = k + carry
        f = np.where(carry | (f < SNAP), 0.0, f)
        return k.astype(int), f

    def locate(self, x) -> CellKey:
        """Cell containing the point x (ties on shared facets broken stably)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        k, f = self._split(x)
        order = np.argsort(-f, kind="stable")
        return CellKey(tuple(int(v) for v in k), tuple(int(v) for v in order))

    def locate_many(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized locate: lattice indices (m, n) and axis orders (m, n)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        k, f = self._split(x)
        order = np.argsort(-f, axis=-1, kind="stable")
        return k, order

    def vertex_point(self, lattice) -> np.ndarray:
        return self.h + self.spacing * np.asarray(lattice, dtype=float)

    def simplex_of(self, key: CellKey) -> Simplex:
        """Simplex realizing the cell: sigma*r*(lattice walk) + h."""
        walk = self.base.walk(tuple(key.perm))
        base_pt = np.asarray(key.lattice, dtype=float)
        if base_pt.shape[0] != self.n:
            raise ValueError("lattice point dimension does not match the frame")
        return Simplex(self.h + self.spacing * (base_pt + walk))

    # -- bounded-region enumeration ------------------------------------------

    def cube_range(self, box: Box) -> tuple[np.ndarray, np.ndarray]:
        """Lattice cubes with positive-measure overlap with the box.

        Returns (lo, counts): cube base indices lo .. lo+counts-1 per axis;
        counts is zero when the box has no volume.
        """
        if box.dim != self.n:
            raise ValueError("box dimension does not match the frame")
        if np.any(box.widths() <= 0.0):
            return np.zeros(self.n, dtype=int), np.zeros(self.n, dtype=int)
        a = (box.lower - self.h) / self.spacing
        b = (box.upper - self.h) / self.spacing
        lo = np.floor(a).astype(int)
        hi = np.ceil(b).astype(int) - 1
        return lo, hi - lo + 1

    def cells_in_box(self, box: Box) -> list[CellKey]:
        """All cells whose intersection with the box has positive measure.

        Cells touching the box only along a facet or vertex are excluded;
        integration over the returned cells is therefore free of double
        counting, and a lattice-aligned box is tiled exactly.
        """
        lo, counts = self.cube_range(box)
        if np.any(counts <= 0):
            return []
        a = (box.lower - self.h) / self.spacing
        b = (box.upper - self.h) / self.spacing
        keys = []
        for idx in np.ndindex(*counts):
            k = lo + np.asarray(idx)
            sub_lo = np.maximum(a - k, 0.0)
            sub_up = np.minimum(b - k, 1.0)
            lattice = tuple(int(v) for v in k)
            for perm in self.base.perms:
                if _descending_chain_fits(sub_lo, sub_up, perm):
                    keys.append(CellKey(lattice, perm))
        return keys

    def vertices_in_box(self, box: Box) -> np.ndarray:
        """Lattice vertices sigma*r*Z^n + h inside the box (boundary included)."""
        if box.dim != self.n:
            raise ValueError("box dimension does not match the frame")
        a = (box.lower - self.h) / self.spacing
        b = (box.upper - self.h) / self.spacing
        lo = np.ceil(a - VERTEX_TOL).astype(int)
        hi = np.floor(b + VERTEX_TOL).astype(int)
        if np.any(hi < lo):
            return np.empty((0, self.n))
        axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
        grid = np.meshgrid(*axes, indexing="ij")
        lattice = np.stack([g.ravel() for g in grid], axis=1)
        return self.h + self.spacing * lattice


def _descending_chain_fits(lo: np.ndarray, up: np.ndarray, perm: tuple[int, ...]) -> bool:
    """Whether the open box (lo, up) meets the open cell {f_p1 > ... > f_pn}.

    Greedy from the top: a strictly descending chain exists iff each axis
    interval still has room below the running upper bound.
    """
    running = 1.0
    for axis in perm:
        hi = min(up[axis], running)
        if hi <= lo[axis]:
            return False
        running = hi
    return True
