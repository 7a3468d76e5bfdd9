"""Tensor-product B-spline velocity surfaces on clamped uniform knots.

The design variables of the optimizer are the coefficients of a bivariate
B-spline; evaluating it at element centroids yields one normal velocity per
element. Basis evaluation uses the standard knot-span recurrence and is
right-continuous: each basis function lives on half-open spans, except that
the last basis function takes the value 1 at the right endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class KnotVector:
    degree: int
    knots: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "knots", np.asarray(self.knots, dtype=float))
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        if self.knots.size < 2 * (self.degree + 1):
            raise ValueError("knot vector too short for the degree")
        if np.any(np.diff(self.knots) < 0):
            raise ValueError("knots must be nondecreasing")

    @property
    def n_basis(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def length(self) -> float:
        return float(self.knots[-1] - self.knots[0])


def open_uniform_knots(n_basis: int, degree: int, axis_length: float) -> KnotVector:
    """Clamped knot vector with uniform interior spacing on [0, axis_length]."""
    if n_basis < degree + 1:
        raise ValueError("n_basis must be at least degree + 1")
    if axis_length <= 0.0:
        raise ValueError("axis_length must be positive")
    n_spans = n_basis - degree
    interior = np.linspace(0.0, axis_length, n_spans + 1)[1:-1]
    knots = np.concatenate(
        [np.zeros(degree + 1), interior, np.full(degree + 1, axis_length)]
    )
    return KnotVector(degree=degree, knots=knots)


def find_spans(kv: KnotVector, x: np.ndarray) -> np.ndarray:
    """Index of the knot span containing each x (right-continuous)."""
    spans = np.searchsorted(kv.knots, np.asarray(x, dtype=float), side="right") - 1
    return np.clip(spans, kv.degree, kv.n_basis - 1)


def basis_functions(kv: KnotVector, x: np.ndarray):
    """All nonzero basis values at each x.

    Returns (spans, values) with values of shape (len(x), degree + 1);
    column a holds basis function (span - degree + a).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    spans = find_spans(kv, x)
    d = kv.degree
    t = kv.knots
    values = np.ones((x.size, d + 1))
    left = np.empty((x.size, d + 1))
    right = np.empty((x.size, d + 1))
    for j in range(1, d + 1):
        left[:, j] = x - t[spans + 1 - j]
        right[:, j] = t[spans + j] - x
        saved = np.zeros(x.size)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            temp = np.divide(
                values[:, r], denom, out=np.zeros_like(saved), where=denom != 0
            )
            values[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        values[:, j] = saved
    return spans, values


def basis_value(kv: KnotVector, index: int, x: float) -> float:
    """Single basis function value, zero outside its support."""
    if not 0 <= index < kv.n_basis:
        raise ValueError(f"basis index {index} out of range [0, {kv.n_basis})")
    x = float(x)
    if x < kv.knots[0] or x > kv.knots[-1]:
        return 0.0
    spans, values = basis_functions(kv, np.array([x]))
    offset = index - (int(spans[0]) - kv.degree)
    if not 0 <= offset <= kv.degree:
        return 0.0
    return float(values[0, offset])


@dataclass
class BsplineSurface:
    """Tensor-product surface: coeffs indexed [k, l] for x- and y-bases."""

    kv_x: KnotVector
    kv_y: KnotVector
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        expected = (self.kv_x.n_basis, self.kv_y.n_basis)
        if self.coeffs.shape != expected:
            raise ValueError(
                f"coefficient array shape {self.coeffs.shape} does not match "
                f"basis counts {expected}"
            )

    @property
    def n_coeffs(self) -> int:
        return self.coeffs.size


def surface_for_domain(
    lx: float, ly: float, degree_x: int, degree_y: int, knot_interval: float
) -> BsplineSurface:
    """Zero-coefficient surface whose knots tile [0, lx] x [0, ly].

    The requested interval must divide each axis length to within one span;
    the actual spacing is the nearest exact divisor.
    """
    if knot_interval <= 0.0:
        raise ValueError("knot interval must be positive")
    kvs = []
    for length, degree in ((lx, degree_x), (ly, degree_y)):
        n_spans = max(1, int(round(length / knot_interval)))
        if abs(n_spans * knot_interval - length) > knot_interval:
            raise ValueError(
                f"knot interval {knot_interval} does not divide axis length "
                f"{length} to within one span"
            )
        kvs.append(open_uniform_knots(n_spans + degree, degree, length))
    coeffs = np.zeros((kvs[0].n_basis, kvs[1].n_basis))
    return BsplineSurface(kv_x=kvs[0], kv_y=kvs[1], coeffs=coeffs)


def basis_matrix(surface: BsplineSurface, points: np.ndarray) -> sp.csr_matrix:
    """Sparse evaluation matrix: (n_points, n_coeffs) with row sums 1.

    Row p holds B_k(x_p) B_l(y_p) at flat column k * n_basis_y + l. The same
    matrix evaluates velocities (matrix @ coeffs) and projects element
    sensitivities back onto coefficients (matrix.T @ weights).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    spans_x, vals_x = basis_functions(surface.kv_x, points[:, 0])
    spans_y, vals_y = basis_functions(surface.kv_y, points[:, 1])
    px, py = surface.kv_x.degree, surface.kv_y.degree
    n_by = surface.kv_y.n_basis
    first_x = spans_x - px
    first_y = spans_y - py
    cols = (
        (first_x[:, None, None] + np.arange(px + 1)[None, :, None]) * n_by
        + first_y[:, None, None]
        + np.arange(py + 1)[None, None, :]
    )
    data = np.einsum("na,nb->nab", vals_x, vals_y)
    rows = np.broadcast_to(
        np.arange(points.shape[0])[:, None, None], cols.shape
    )
    return sp.coo_matrix(
        (data.ravel(), (rows.ravel(), cols.ravel())),
        shape=(points.shape[0], surface.n_coeffs),
    ).tocsr()


def knot_velocities(surface: BsplineSurface, centroids: np.ndarray) -> np.ndarray:
    """Evaluate the surface at element centroids."""
    centroids = np.atleast_2d(np.asarray(centroids, dtype=float))
    if (
        centroids[:, 0].min() < surface.kv_x.knots[0]
        or centroids[:, 0].max() > surface.kv_x.knots[-1]
        or centroids[:, 1].min() < surface.kv_y.knots[0]
        or centroids[:, 1].max() > surface.kv_y.knots[-1]
    ):
        raise ValueError("centroid outside the spline domain")
    return basis_matrix(surface, centroids) @ surface.coeffs.ravel()


def velocity_field_from_knots(values: np.ndarray, v_max: float):
    """Uniformly rescale evaluated velocities into [-v_max, v_max].

    Returns (field, scale) with scale = min(1, v_max / max|values|). The
    rescale factor is treated as a constant by the sensitivity chain.
    """
    if v_max <= 0.0:
        raise ValueError("v_max must be positive")
    values = np.asarray(values, dtype=float)
    peak = np.abs(values).max() if values.size else 0.0
    scale = 1.0 if peak <= v_max else v_max / peak
    return values * scale, scale
