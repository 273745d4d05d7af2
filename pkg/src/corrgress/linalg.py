"""Correlation-matrix data structures and O(K^2) incremental update kernels.

A correlation matrix is tracked in one of two working representations:

* :class:`CorrelationState` carries the matrix together with its inverse and
  determinant, which are maintained incrementally via rank-1
  (Sherman-Morrison) updates when a single off-diagonal entry changes.
* :class:`CholeskyFactor` carries an upper-triangular factor ``gamma`` with
  ``gamma.T @ gamma`` reconstructing the matrix, maintained via rank-1
  Cholesky updates and downdates.

The vectorization convention for the distinct off-diagonal entries is lower
triangle, column-major, fixed globally for the whole package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_PD_PIVOT_TOL = 1e-12
_SINGULAR_TOL = 1e-14


class NotPositiveDefiniteError(ValueError):
    """The matrix (or a requested update of it) is not positive definite."""


class SingularUpdateError(ValueError):
    """A rank-1 update would make the working matrix numerically singular."""


def vector_length(dim: int) -> int:
    return dim * (dim - 1) // 2


def matrix_dim(length: int) -> int:
    """Inverse of vector_length; rejects lengths that fit no dimension."""
    dim = round((1 + math.sqrt(1 + 8 * length)) / 2)
    if vector_length(dim) != length:
        raise ValueError(f"{length} is not a valid correlation-vector length")
    return dim


def pair_indices(dim: int) -> list[tuple[int, int]]:
    """(row, col) for each vector position, lower triangle column-major.

    For dim=4 this yields (1,0),(2,0),(3,0),(2,1),(3,1),(3,2), matching the
    conventional numbering of the six distinct correlations.
    """
    return [(r, c) for c in range(dim - 1) for r in range(c + 1, dim)]


@dataclass(frozen=True)
class CorrelationVector:
    """Distinct correlations of a K x K matrix in the global ordering."""

    values: np.ndarray
    dim: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.shape[0] != vector_length(self.dim):
            raise ValueError(
                f"expected {vector_length(self.dim)} values for dim={self.dim}, "
                f"got {values.shape}"
            )


def assemble_matrix(rho: CorrelationVector | np.ndarray, dim: int | None = None) -> np.ndarray:
    """Assemble the symmetric unit-diagonal matrix from its distinct entries.

    No positive-definiteness check is performed.
    """
    if isinstance(rho, CorrelationVector):
        values, dim = rho.values, rho.dim
    else:
        values = np.asarray(rho, dtype=float)
        if dim is None:
            raise ValueError("dim is required when passing a bare array")
        if values.shape != (vector_length(dim),):
            raise ValueError(
                f"expected {vector_length(dim)} values for dim={dim}, got {values.shape}"
            )
    out = np.eye(dim)
    for l, (r, c) in enumerate(pair_indices(dim)):
        out[r, c] = out[c, r] = values[l]
    return out


@dataclass(frozen=True)
class CholeskyFactor:
    """Upper-triangular factor gamma with gamma.T @ gamma = R."""

    gamma: np.ndarray
    dim: int

    def matrix(self) -> np.ndarray:
        return self.gamma.T @ self.gamma


@dataclass(frozen=True)
class CorrelationState:
    """A correlation matrix with cached inverse and determinant."""

    matrix: np.ndarray
    inverse: np.ndarray
    det: float
    dim: int

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "CorrelationState":
        matrix = np.asarray(matrix, dtype=float)
        try_cholesky(matrix)  # validates symmetry, unit diagonal, PD
        return cls(
            matrix=matrix.copy(),
            inverse=np.linalg.inv(matrix),
            det=float(np.linalg.det(matrix)),
            dim=matrix.shape[0],
        )

    @classmethod
    def from_vector(cls, rho: CorrelationVector) -> "CorrelationState":
        return cls.from_matrix(assemble_matrix(rho))


def _check_square_symmetric_unit_diag(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(M, M.T, atol=1e-10):
        raise ValueError("matrix must be symmetric")
    if not np.allclose(np.diag(M), 1.0, atol=1e-10):
        raise ValueError("matrix must have unit diagonal")
    return M


def try_cholesky(M: np.ndarray) -> CholeskyFactor:
    """Upper-triangular Cholesky factor of a unit-diagonal symmetric matrix.

    Raises NotPositiveDefiniteError when any pivot falls below the PD
    tolerance, which is the package-wide positive-definiteness test.
    """
    M = _check_square_symmetric_unit_diag(M)
    dim = M.shape[0]
    gamma = np.zeros((dim, dim))
    for j in range(dim):
        s = M[j, j] - gamma[:j, j] @ gamma[:j, j]
        if s <= _PD_PIVOT_TOL:
            raise NotPositiveDefiniteError(f"non-positive pivot at column {j}")
        gamma[j, j] = np.sqrt(s)
        if j + 1 < dim:
            gamma[j, j + 1:] = (M[j, j + 1:] - gamma[:j, j] @ gamma[:j, j + 1:]) / gamma[j, j]
    return CholeskyFactor(gamma=gamma, dim=dim)


def is_positive_definite(M: np.ndarray) -> bool:
    try:
        try_cholesky(M)
        return True
    except NotPositiveDefiniteError:
        return False


def rank1_inverse_det_update(state: CorrelationState, u: np.ndarray, v: np.ndarray) -> CorrelationState:
    """State of M + u v^T via the Sherman-Morrison formula, O(K^2)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    Winv_u = state.inverse @ u
    vT_W = v @ state.inverse
    denom = 1.0 + v @ Winv_u
    if abs(denom) < _SINGULAR_TOL:
        raise SingularUpdateError("rank-1 update makes the matrix singular")
    new_inverse = state.inverse - np.outer(Winv_u, vT_W) / denom
    return CorrelationState(
        matrix=state.matrix + np.outer(u, v),
        inverse=new_inverse,
        det=state.det * denom,
        dim=state.dim,
    )


def perturb_offdiagonal(state: CorrelationState, k1: int, k2: int, eps: float) -> CorrelationState:
    """Add eps to entries (k1, k2) and (k2, k1), updating inverse and det.

    Realized as two sparse rank-1 updates; cost O(K^2).  The caller is
    responsible for eps keeping the matrix positive definite.
    """
    if k1 == k2:
        raise ValueError("k1 and k2 must differ")
    if eps == 0.0:
        return state
    s = np.sqrt(abs(eps))
    sgn = 1.0 if eps > 0 else -1.0
    w1 = np.zeros(state.dim)
    w2 = np.zeros(state.dim)
    w1[k1] = s
    w2[k2] = s
    state = rank1_inverse_det_update(state, sgn * w1, w2)
    state = rank1_inverse_det_update(state, w2, sgn * w1)
    return state


def chol_rank1_modify(factor: CholeskyFactor, w: np.ndarray, sign: int) -> CholeskyFactor:
    """Cholesky factor of gamma.T @ gamma + sign * w w^T in O(K^2)."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    dim = factor.dim
    g = factor.gamma.copy()
    x = np.asarray(w, dtype=float).copy()
    for k in range(dim):
        gkk = g[k, k]
        r2 = gkk * gkk + sign * x[k] * x[k]
        if r2 <= _PD_PIVOT_TOL:
            raise NotPositiveDefiniteError("rank-1 downdate breaks positive definiteness")
        r = np.sqrt(r2)
        c = r / gkk
        s = x[k] / gkk
        g[k, k] = r
        if k + 1 < dim:
            g[k, k + 1:] = (g[k, k + 1:] + sign * s * x[k + 1:]) / c
            x[k + 1:] = c * x[k + 1:] - s * g[k, k + 1:]
    return CholeskyFactor(gamma=g, dim=dim)


def perturb_offdiagonal_chol(factor: CholeskyFactor, k1: int, k2: int, eps: float) -> CholeskyFactor:
    """Factor-space analogue of perturb_offdiagonal: three rank-1 updates."""
    if k1 == k2:
        raise ValueError("k1 and k2 must differ")
    if eps == 0.0:
        return factor
    s = np.sqrt(abs(eps))
    sgn = 1 if eps > 0 else -1
    dim = factor.dim
    w = np.zeros(dim)
    w[k1] = s
    w[k2] = s
    w1 = np.zeros(dim)
    w1[k1] = s
    w2 = np.zeros(dim)
    w2[k2] = s
    factor = chol_rank1_modify(factor, w, sgn)
    factor = chol_rank1_modify(factor, w1, -sgn)
    factor = chol_rank1_modify(factor, w2, -sgn)
    return factor


def move_target_to_last(factor: CholeskyFactor, k1: int, k2: int) -> CholeskyFactor:
    """Re-factor so the (k1, k2) entry sits at position (K, K-1).

    Returns the upper-triangular factor of P^T R P where P is the symmetric
    permutation sending k2 -> K-1 and k1 -> K.  Implemented as a column
    permutation of gamma followed by Givens rotations restoring
    triangularity, with rotation signs chosen so the diagonal stays positive.
    """
    dim = factor.dim
    if not (0 <= k2 < k1 < dim):
        raise ValueError("need 0 <= k2 < k1 < dim")
    if k1 == dim - 1 and k2 == dim - 2:
        return factor
    perm = [i for i in range(dim) if i not in (k1, k2)] + [k2, k1]
    g = factor.gamma[:, perm].copy()
    # Givens-QR: zero subdiagonal entries column by column.
    for c in range(dim):
        for r in range(dim - 1, c, -1):
            b = g[r, c]
            if b == 0.0:
                continue
            a = g[r - 1, c]
            rad = np.hypot(a, b)
            cs = a / rad
            sn = b / rad
            row_hi = cs * g[r - 1, :] + sn * g[r, :]
            row_lo = -sn * g[r - 1, :] + cs * g[r, :]
            g[r - 1, :] = row_hi
            g[r, :] = row_lo
            g[r, c] = 0.0
    for j in range(dim):
        if g[j, j] < 0:
            g[j, :] = -g[j, :]
    return CholeskyFactor(gamma=g, dim=dim)
