"""Covariate test sets and feasible intervals for correlation coefficients.

Correlations follow the linear model ``rho = alpha^T x``.  Feasibility of a
coefficient matrix ``alpha`` means the assembled correlation matrix is
positive definite at every covariate point in a finite test set; the convex
hull of the test set then inherits feasibility.  Given everything else held
fixed, the set of values of one coefficient ``alpha[l, m]`` that preserves
feasibility is an interval, computed here either from determinants evaluated
at three points or directly from a Cholesky factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import linalg
from .linalg import CholeskyFactor, NotPositiveDefiniteError

MAX_VERTEX_POINTS = 2 ** 20


@dataclass(frozen=True)
class Term:
    """One expanded-covariate term: copy(i), square(i) or product(i, j)."""

    kind: str  # "copy" | "square" | "product"
    i: int
    j: int | None = None

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "copy":
            return z[..., self.i]
        if self.kind == "square":
            return z[..., self.i] ** 2
        if self.kind == "product":
            return z[..., self.i] * z[..., self.j]
        raise ValueError(f"unknown term kind {self.kind!r}")


@dataclass(frozen=True)
class CovariateExpansion:
    """Mapping from base covariates z (length p, first entry 1) to x (length q)."""

    base_dim: int
    terms: tuple[Term, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms or terms[0] != Term("copy", 0):
            raise ValueError("first term must be copy(0), the constant 1")
        for t in terms:
            refs = (t.i,) if t.j is None else (t.i, t.j)
            if any(r >= self.base_dim or r < 0 for r in refs):
                raise ValueError(f"term {t} references an index outside base_dim={self.base_dim}")

    @property
    def expanded_dim(self) -> int:
        return len(self.terms)

    @property
    def is_affine(self) -> bool:
        return all(t.kind == "copy" for t in self.terms)

    def apply(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return np.stack([t.evaluate(z) for t in self.terms], axis=-1)

    @classmethod
    def identity(cls, p: int) -> "CovariateExpansion":
        return cls(base_dim=p, terms=tuple(Term("copy", i) for i in range(p)))


@dataclass(frozen=True)
class TestSet:
    """Finite covariate set at which positive definiteness is enforced."""

    points: np.ndarray  # T x q
    recipe: str
    source_bounds: np.ndarray | None = None  # (p-1) x 2, excludes the constant

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", points)
        if points.ndim != 2:
            raise ValueError("points must be a 2-D array")
        if not np.all(points[:, 0] == 1.0):
            raise ValueError("first column of every test point must be 1")
        uniq = np.unique(points, axis=0)
        if uniq.shape[0] != points.shape[0]:
            raise ValueError("test points must be distinct")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def to_csv(self, path) -> None:
        q = self.points.shape[1]
        header = ",".join(f"x{m}" for m in range(q))
        np.savetxt(path, self.points, delimiter=",", header=header, comments="")

    @classmethod
    def from_csv(cls, path) -> "TestSet":
        pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(points=pts, recipe="loaded")


@dataclass(frozen=True)
class FeasibleInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval ({self.lo}, {self.hi})")

    def contains(self, x: float) -> bool:
        return self.lo < x < self.hi


def quadratic_from_three_points(f_neg1: float, f_0: float, f_1: float) -> tuple[float, float, float]:
    """Coefficients (c, d, e) of the quadratic through (-1, 0, 1) values.

    The inputs are determinants of the correlation matrix as one correlation
    sweeps {-1, 0, 1}; the determinant is exactly quadratic in that entry.
    """
    c = (f_1 + f_neg1 - 2.0 * f_0) / 2.0
    d = (f_1 - f_neg1) / 2.0
    e = f_0
    return c, d, e


def rho_roots(c: float, d: float, e: float) -> tuple[float, float]:
    """Midpoint g and half-width h of the root interval of c x^2 + d x + e.

    The determinant is positive, hence the matrix positive definite, exactly
    for the single correlation in (g - h, g + h).
    """
    if c >= 0.0:
        raise NotPositiveDefiniteError("quadratic coefficient must be negative (base matrix not PD?)")
    disc = d * d - 4.0 * c * e
    if disc < 0.0:
        raise NotPositiveDefiniteError("negative discriminant (base matrix not PD?)")
    g = -d / (2.0 * c)
    h = math.sqrt(disc / (4.0 * c * c))
    return g, h


def rho_interval_from_cholesky(gamma_tilde: CholeskyFactor) -> tuple[float, float]:
    """(g, h) for the correlation at position (K, K-1) of the factored matrix.

    The factor must already place the target correlation at (K, K-1); use
    linalg.move_target_to_last first.
    """
    g_mat = gamma_tilde.gamma
    K = gamma_tilde.dim
    g = float(g_mat[: K - 2, K - 2] @ g_mat[: K - 2, K - 1])
    rad = 1.0 - float(g_mat[: K - 2, K - 1] @ g_mat[: K - 2, K - 1])
    if rad <= 0.0:
        raise NotPositiveDefiniteError("negative radicand: numerically broken factor")
    h = float(g_mat[K - 2, K - 2]) * math.sqrt(rad)
    return g, h


def rho_interval_from_determinants(rho_rest: np.ndarray, l: int, dim: int) -> tuple[float, float]:
    """(g, h) via determinants at rho_l in {-1, 0, 1}; reference route."""
    fvals = []
    for r in (-1.0, 0.0, 1.0):
        rho = np.array(rho_rest, dtype=float)
        rho[l] = r
        fvals.append(np.linalg.det(linalg.assemble_matrix(rho, dim)))
    c, d, e = quadratic_from_three_points(fvals[0], fvals[1], fvals[2])
    return rho_roots(c, d, e)


def alpha_interval(
    alpha: np.ndarray,
    l: int,
    m: int,
    test_points: TestSet,
    factors: list[CholeskyFactor],
) -> FeasibleInterval:
    """Feasible interval for coefficient alpha[l, m] over all test points.

    ``factors`` are the current Cholesky factors of the test-point matrices,
    consistent with ``alpha``.  Feasibility of the current alpha guarantees
    the intersection is non-empty and contains alpha[l, m].
    """
    alpha = np.asarray(alpha, dtype=float)
    dim = factors[0].dim
    k1, k2 = linalg.pair_indices(dim)[l]
    lo, hi = -math.inf, math.inf
    for j in range(test_points.size):
        x = test_points.points[j]
        if x[m] == 0.0:
            continue
        gt = linalg.move_target_to_last(factors[j], k1, k2)
        g, h = rho_interval_from_cholesky(gt)
        s_other = float(alpha[l] @ x) - alpha[l, m] * x[m]
        sgn = 1.0 if x[m] > 0 else -1.0
        a = (g - s_other - sgn * h) / x[m]
        b = (g - s_other + sgn * h) / x[m]
        if a > b:
            a, b = b, a
        lo = max(lo, a)
        hi = min(hi, b)
    if not lo < hi:
        raise NotPositiveDefiniteError(
            "empty intersection: current alpha is not feasible on the test set"
        )
    return FeasibleInterval(lo=lo, hi=hi)


def is_feasible(alpha: np.ndarray, test_points: TestSet, dim: int) -> bool:
    """True iff the assembled matrix is PD at every test point."""
    alpha = np.asarray(alpha, dtype=float)
    for j in range(test_points.size):
        rho = alpha @ test_points.points[j]
        if not linalg.is_positive_definite(linalg.assemble_matrix(rho, dim)):
            return False
    return True


def test_point_factors(alpha: np.ndarray, test_points: TestSet, dim: int) -> list[CholeskyFactor]:
    """Cholesky factors of the test-point matrices under alpha (all must be PD)."""
    alpha = np.asarray(alpha, dtype=float)
    return [
        linalg.try_cholesky(linalg.assemble_matrix(alpha @ test_points.points[j], dim))
        for j in range(test_points.size)
    ]


def build_test_set(
    expansion: CovariateExpansion,
    z_data: np.ndarray | None,
    strategy: str,
    bounds: np.ndarray | None = None,
) -> TestSet:
    """Construct the covariate test set.

    strategies:
      - "observed-distinct": distinct expanded rows of the data.
      - "hyperrectangle-vertices": expansion applied to all vertices of the
        per-variable bounds box; affine expansions only.
      - "quadratic-augmented": vertices plus, for each square term, the
        tangent-intersection point with ((l+u)/2, l*u) substituted for
        (z, z^2).
    """
    if strategy == "observed-distinct":
        if z_data is None:
            raise ValueError("observed-distinct requires data")
        z_data = np.asarray(z_data, dtype=float)
        if not np.all(z_data[:, 0] == 1.0):
            raise ValueError("first base covariate must be the constant 1")
        pts = np.unique(expansion.apply(z_data), axis=0)
        return TestSet(points=pts, recipe="observed-distinct")

    if strategy not in ("hyperrectangle-vertices", "quadratic-augmented"):
        raise ValueError(f"unknown strategy {strategy!r}")

    if bounds is None:
        if z_data is None:
            raise ValueError("vertex strategies need bounds or data to derive them")
        z_data = np.asarray(z_data, dtype=float)
        bounds = np.stack([z_data[:, 1:].min(axis=0), z_data[:, 1:].max(axis=0)], axis=1)
    bounds = np.asarray(bounds, dtype=float)
    p_free = expansion.base_dim - 1
    if bounds.shape != (p_free, 2):
        raise ValueError(f"bounds must be {p_free} x 2")
    if 2 ** p_free > MAX_VERTEX_POINTS:
        raise ValueError(
            "too many vertices to enumerate; use the observed-distinct strategy"
        )

    has_nonaffine = not expansion.is_affine
    if strategy == "hyperrectangle-vertices" and has_nonaffine:
        raise ValueError(
            "hyperrectangle-vertices is only valid for affine expansions; "
            "use quadratic-augmented or observed-distinct"
        )
    for t in expansion.terms:
        if t.kind == "product":
            raise ValueError(
                "interaction terms are only supported under observed-distinct"
            )

    vertices = np.array(
        [(1.0, *v) for v in product(*(tuple(b) for b in bounds))], dtype=float
    )
    pts = expansion.apply(vertices)

    if strategy == "quadratic-augmented":
        extra = []
        for t_idx, t in enumerate(expansion.terms):
            if t.kind != "square":
                continue
            s = t.i
            lo_s, up_s = bounds[s - 1]
            # Tangent-intersection augmentation for each vertex combination of
            # the remaining coordinates.
            others = [i for i in range(1, expansion.base_dim) if i != s]
            for combo in product(*(tuple(bounds[i - 1]) for i in others)):
                z = np.ones(expansion.base_dim)
                for idx, val in zip(others, combo):
                    z[idx] = val
                z[s] = (lo_s + up_s) / 2.0
                x = expansion.apply(z)[0]
                x[t_idx] = lo_s * up_s
                extra.append(x)
        if extra:
            pts = np.vstack([pts, np.array(extra)])

    pts = np.unique(pts, axis=0)
    return TestSet(points=pts, recipe=strategy, source_bounds=bounds)
