"""Piecewise affine (Lagrange) interpolation of Sobolev functions on
translated and dilated periodic simplicial triangulations, with numerical
verification of the underlying integral representation identities and the
bounded-variation counterexample."""

from .analysis import (
    AveragedReport,
    BallRegion,
    BVStatistics,
    ErrorReport,
    LemmaResidual,
    TriangulationSearchError,
    VertexRegion,
    averaged_error,
    bv_counterexample,
    check_lemma1,
    check_lemma2,
    error_report,
    find_triangulation,
    grad_error,
    kernel_K,
    total_variation,
    translation_error,
    value_error,
)
from .fields import (
    AffineField,
    FieldGradientError,
    GaussianBump,
    InterpolantField,
    LebesgueGuardError,
    QuadraticField,
    ScalarField,
    SmoothBump,
    TriangleIndicator,
    make_field,
    smooth_corpus,
)
from .geometry import DegenerateSimplexError, Simplex, gauge_ball, signed_volume
from .mesh import BaseTriangulation, Box, CellKey, TriangulationFrame
from .quadrature import (
    ConeRule,
    QuadratureError,
    SimplexRule,
    integrate_simplex,
    integrate_vertex_cone,
)

__version__ = "0.1.0"
