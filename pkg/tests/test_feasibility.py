import math

import numpy as np
import pytest

from corrgress import feasibility as fz
from corrgress import linalg
from corrgress.feasibility import (CovariateExpansion, TestSet, Term,
                                   alpha_interval, build_test_set, is_feasible,
                                   quadratic_from_three_points,
                                   rho_interval_from_cholesky,
                                   rho_interval_from_determinants, rho_roots)
from corrgress.feasibility import test_point_factors as point_factors


def dense_interval_scan(rho_rest, l, dim, res=1e-4):
    """Grid-scan oracle: feasible range of correlation l with the rest fixed."""
    grid = np.arange(-1 + res, 1, res)
    ok = []
    for r in grid:
        rho = rho_rest.copy()
        rho[l] = r
        if linalg.is_positive_definite(linalg.assemble_matrix(rho, dim)):
            ok.append(r)
    return ok[0], ok[-1]


def test_quadratic_from_three_points_examples():
    assert quadratic_from_three_points(0.0, 1.0, 0.0) == (-1.0, 0.0, 1.0)
    c, d, e = quadratic_from_three_points(0.19, 0.51, 0.19)
    assert np.allclose((c, d, e), (-0.32, 0.0, 0.51))
    # symmetric determinant values always zero the linear term
    assert quadratic_from_three_points(0.3, 0.9, 0.3)[1] == 0.0


def test_rho_roots_examples():
    assert rho_roots(-1.0, 0.0, 1.0) == (0.0, 1.0)
    g, h = rho_roots(-1.0, 0.5, 0.5)
    assert np.isclose(g, 0.25) and np.isclose(h, 0.75)
    with pytest.raises(ValueError):
        rho_roots(0.5, 0.0, 1.0)


def test_rho_interval_k3_hand_value():
    # both fixed correlations at 0.7: feasible range (2*0.49 - 1, 1)
    g, h = rho_interval_from_determinants(np.array([0.7, 0.7, 0.0]), 2, 3)
    assert np.isclose(g - h, -0.02) and np.isclose(g + h, 1.0)

    f = linalg.try_cholesky(linalg.assemble_matrix(np.array([0.7, 0.7, 0.0]), 3))
    moved = linalg.move_target_to_last(f, 2, 1)
    g2, h2 = rho_interval_from_cholesky(moved)
    assert np.isclose(g2, 0.49) and np.isclose(h2, 0.51)


def test_rho_interval_identity_factor():
    g, h = rho_interval_from_cholesky(linalg.try_cholesky(np.eye(3)))
    assert (g, h) == (0.0, 1.0)


def test_route_equivalence_random_matrices():
    rng = np.random.default_rng(7)
    for dim in range(3, 9):
        npairs = dim * (dim - 1) // 2
        for _ in range(20):
            rho = np.zeros(npairs)
            for i in range(npairs):  # greedy feasible fill
                g, h = rho_interval_from_determinants(rho, i, dim)
                rho[i] = g + 0.7 * h * rng.uniform(-1, 1)
            l = int(rng.integers(npairs))
            g1, h1 = rho_interval_from_determinants(rho, l, dim)
            k1, k2 = linalg.pair_indices(dim)[l]
            f = linalg.try_cholesky(linalg.assemble_matrix(rho, dim))
            g2, h2 = rho_interval_from_cholesky(linalg.move_target_to_last(f, k1, k2))
            assert abs(g1 - g2) < 1e-10 and abs(h1 - h2) < 1e-10


def test_rho_interval_matches_grid_scan():
    rho = np.array([0.5, -0.3, 0.2, 0.1, -0.4, 0.0])
    for l in range(6):
        g, h = rho_interval_from_determinants(rho, l, 4)
        lo, hi = dense_interval_scan(rho, l, 4)
        assert abs((g - h) - lo) < 2e-4
        assert abs((g + h) - hi) < 2e-4


def test_alpha_interval_slope_example():
    # rho1 = a0 + a1*x with the other two correlations fixed at 0.7
    alpha = np.array([[0.0, 0.0], [0.7, 0.0], [0.7, 0.0]])
    pts = TestSet(points=np.array([[1.0, 0.0], [1.0, 1.0]]), recipe="observed-distinct")
    factors = point_factors(alpha, pts, 3)
    iv = alpha_interval(alpha, 0, 1, pts, factors)
    assert np.isclose(iv.lo, -0.02) and np.isclose(iv.hi, 1.0)


def test_alpha_interval_k2_intercept():
    alpha = np.zeros((1, 1))
    pts = TestSet(points=np.array([[1.0]]), recipe="observed-distinct")
    iv = alpha_interval(alpha, 0, 0, pts, point_factors(alpha, pts, 2))
    assert np.isclose(iv.lo, -1.0) and np.isclose(iv.hi, 1.0)


def test_alpha_interval_zero_column_unbounded():
    alpha = np.zeros((1, 2))
    pts = TestSet(points=np.array([[1.0, 0.0]]), recipe="observed-distinct")
    iv = alpha_interval(alpha, 0, 1, pts, point_factors(alpha, pts, 2))
    assert iv.lo == -math.inf and iv.hi == math.inf


def test_alpha_interval_contains_current_and_endpoints_tight():
    rng = np.random.default_rng(13)
    dim, L = 4, 6
    for _ in range(30):
        q = int(rng.integers(2, 4))
        T = int(rng.integers(1, 8))
        pts = np.unique(np.column_stack([np.ones(T), rng.uniform(-1, 1, (T, q - 1))]), axis=0)
        ts = TestSet(points=pts, recipe="observed-distinct")
        alpha = rng.uniform(-0.2, 0.2, (L, q))
        while not is_feasible(alpha, ts, dim):
            alpha *= 0.5
        l, m = int(rng.integers(L)), int(rng.integers(q))
        iv = alpha_interval(alpha, l, m, ts, point_factors(alpha, ts, dim))
        assert iv.contains(alpha[l, m])
        for frac in (0.05, 0.5, 0.95):
            trial = alpha.copy()
            trial[l, m] = iv.lo + frac * (iv.hi - iv.lo)
            assert is_feasible(trial, ts, dim)
        for edge, off in ((iv.lo, -1e-3), (iv.hi, 1e-3)):
            if math.isfinite(edge):
                trial = alpha.copy()
                trial[l, m] = edge + off
                assert not is_feasible(trial, ts, dim)


def test_is_feasible_examples():
    pts = TestSet(points=np.array([[1.0, 0.3], [1.0, -0.8]]), recipe="observed-distinct")
    assert is_feasible(np.zeros((3, 2)), pts, 3)
    bad = np.array([[0.9, 0.0], [0.9, 0.0], [-0.9, 0.0]])
    assert not is_feasible(bad, pts, 3)


def test_feasible_set_convexity():
    rng = np.random.default_rng(17)
    pts = TestSet(points=np.column_stack([np.ones(5), rng.uniform(-1, 1, 5)]),
                  recipe="observed-distinct")
    found = 0
    while found < 10:
        a1 = rng.uniform(-0.5, 0.5, (3, 2))
        a2 = rng.uniform(-0.5, 0.5, (3, 2))
        if is_feasible(a1, pts, 3) and is_feasible(a2, pts, 3):
            w = rng.uniform()
            assert is_feasible(w * a1 + (1 - w) * a2, pts, 3)
            found += 1


def test_build_test_set_observed_distinct_dedups():
    exp = CovariateExpansion.identity(2)
    z = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 0.0]])
    ts = build_test_set(exp, z, "observed-distinct")
    assert ts.size == 2


def test_build_test_set_vertices():
    exp = CovariateExpansion.identity(2)
    ts = build_test_set(exp, None, "hyperrectangle-vertices",
                        bounds=np.array([[2.0, 4.0]]))
    got = {tuple(p) for p in ts.points}
    assert got == {(1.0, 2.0), (1.0, 4.0)}


def test_build_test_set_quadratic_augmented():
    exp = CovariateExpansion(base_dim=2, terms=(
        Term("copy", 0), Term("copy", 1), Term("square", 1)))
    ts = build_test_set(exp, None, "quadratic-augmented",
                        bounds=np.array([[-1.0, 1.0]]))
    rows = {tuple(p) for p in ts.points}
    assert (1.0, 0.0, -1.0) in rows  # tangent-intersection point
    assert (1.0, -1.0, 1.0) in rows and (1.0, 1.0, 1.0) in rows


def test_build_test_set_rejects_nonaffine_vertices():
    exp = CovariateExpansion(base_dim=2, terms=(
        Term("copy", 0), Term("copy", 1), Term("square", 1)))
    with pytest.raises(ValueError):
        build_test_set(exp, None, "hyperrectangle-vertices",
                       bounds=np.array([[-1.0, 1.0]]))


def test_test_set_csv_roundtrip(tmp_path):
    ts = TestSet(points=np.array([[1.0, -0.25], [1.0, 0.75]]),
                 recipe="observed-distinct")
    path = tmp_path / "ts.csv"
    ts.to_csv(path)
    back = TestSet.from_csv(path)
    assert np.array_equal(back.points, ts.points)


def test_empty_intersection_raises():
    alpha = np.array([[0.95]])  # infeasible for K=3 with all pairs at 0.95? no-
    # construct a genuinely infeasible current alpha instead
    alpha = np.array([[0.9], [0.9], [-0.9]])
    pts = TestSet(points=np.array([[1.0]]), recipe="observed-distinct")
    with pytest.raises(linalg.NotPositiveDefiniteError):
        point_factors(alpha, pts, 3)
