"""Natural cubic regression splines in knot-value parameterization.

A spline with k knots is parameterized by its values at the knots; natural
boundary conditions (zero second derivative at the ends) determine the
curve in between.  The basis matrix maps knot values to evaluations, and
the curvature penalty S = D^T B^{-1} D gives the integrated squared second
derivative of the interpolant as a quadratic form in the knot values.

For regression use the basis is identifiability-centered: every column is
mean-centered over the data (so each fitted smooth sums to zero at the
data) and the last column is dropped (the centered columns sum to the zero
vector, so one is redundant); the penalty keeps the matching submatrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded


def quantile_knots(values: np.ndarray, basis_dim: int) -> np.ndarray:
    """Knots at equally spaced quantiles of the covariate, endpoints
    included; errors when the covariate has too few distinct values."""
    values = np.asarray(values, dtype=float)
    if basis_dim < 3:
        raise ValueError(f"basis_dim must be >= 3, got {basis_dim}")
    knots = np.quantile(values, np.linspace(0.0, 1.0, basis_dim))
    if np.unique(knots).size != knots.size:
        distinct = np.unique(values).size
        raise ValueError(
            f"covariate has too little spread for {basis_dim} distinct "
            f"quantile knots ({distinct} distinct values)"
        )
    return knots


def _difference_matrices(knots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The banded matrices relating knot values to interior second
    derivatives: B @ gamma = D @ beta, where beta are knot values and
    gamma the second derivatives at interior knots."""
    k = knots.size
    h = np.diff(knots)
    m = k - 2
    d_mat = np.zeros((m, k))
    b_mat = np.zeros((m, m))
    for i in range(m):
        d_mat[i, i] = 1.0 / h[i]
        d_mat[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        d_mat[i, i + 2] = 1.0 / h[i + 1]
        b_mat[i, i] = (h[i] + h[i + 1]) / 3.0
        if i + 1 < m:
            b_mat[i, i + 1] = h[i + 1] / 6.0
            b_mat[i + 1, i] = h[i + 1] / 6.0
    return d_mat, b_mat


def penalty_matrix(knots: np.ndarray) -> np.ndarray:
    """Integrated squared second derivative as a quadratic form in the
    knot values: S = D^T B^{-1} D, symmetric positive semidefinite with
    constants and straight lines in its null space."""
    knots = np.asarray(knots, dtype=float)
    d_mat, b_mat = _difference_matrices(knots)
    s = d_mat.T @ np.linalg.solve(b_mat, d_mat)
    return (s + s.T) / 2.0


def _second_derivative_map(knots: np.ndarray) -> np.ndarray:
    """(k, k) matrix taking knot values to second derivatives at every
    knot (zero in the first and last rows: natural boundary)."""
    k = knots.size
    d_mat, b_mat = _difference_matrices(knots)
    full = np.zeros((k, k))
    if k > 2:
        diag_form = np.zeros((3, k - 2))
        diag_form[0, 1:] = np.diag(b_mat, 1)
        diag_form[1, :] = np.diag(b_mat)
        diag_form[2, :-1] = np.diag(b_mat, -1)
        full[1:-1, :] = solve_banded((1, 1), diag_form, d_mat)
    return full


def basis_matrix(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Evaluate the k knot-value basis functions at the points ``x``.

    Column j is the natural cubic spline interpolating 1 at knot j and 0
    at the others; rows therefore sum to one.  Points outside the knot
    range are rejected (regression knots always span the data).
    """
    x = np.asarray(x, dtype=float)
    knots = np.asarray(knots, dtype=float)
    k = knots.size
    if k < 3:
        raise ValueError(f"need at least 3 knots, got {k}")
    if np.any(x < knots[0]) or np.any(x > knots[-1]):
        raise ValueError(
            f"evaluation points outside the knot range "
            f"[{knots[0]}, {knots[-1]}]"
        )
    f2 = _second_derivative_map(knots)
    h = np.diff(knots)
    j = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, k - 2)
    hj = h[j]
    left = knots[j]
    right = knots[j + 1]
    a_plus = (x - left) / hj
    a_minus = (right - x) / hj
    c_minus = ((right - x) ** 3 / hj - hj * (right - x)) / 6.0
    c_plus = ((x - left) ** 3 / hj - hj * (x - left)) / 6.0

    basis = np.zeros((x.size, k))
    rows = np.arange(x.size)
    basis[rows, j] += a_minus
    basis[rows, j + 1] += a_plus
    basis += c_minus[:, None] * f2[j, :]
    basis += c_plus[:, None] * f2[j + 1, :]
    return basis


@dataclass(frozen=True, eq=False)
class CenteredSplineBasis:
    """A fitted, centered spline basis for one smooth term.

    ``design`` has basis_dim - 1 columns, each summing to zero over the
    data; ``penalty`` is the matching curvature penalty submatrix.
    """

    name: str
    knots: np.ndarray
    col_means: np.ndarray
    design: np.ndarray
    penalty: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.design.shape[1])

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Centered basis at new points (same centering as at fit time)."""
        raw = basis_matrix(x, self.knots)
        return (raw - self.col_means)[:, :-1]


def build_centered_basis(
    name: str, values: np.ndarray, basis_dim: int
) -> CenteredSplineBasis:
    """Quantile knots, raw basis, mean-centering, and last-column drop for
    one covariate; the penalty is reduced to the kept columns."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise ValueError(f"covariate {name!r} must be 1-D")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"covariate {name!r} contains non-finite values")
    knots = quantile_knots(values, basis_dim)
    raw = basis_matrix(values, knots)
    col_means = raw.mean(axis=0)
    design = (raw - col_means)[:, :-1]
    penalty = penalty_matrix(knots)[:-1, :-1]
    return CenteredSplineBasis(
        name=name,
        knots=knots,
        col_means=col_means,
        design=design,
        penalty=penalty,
    )
