import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrgress import linalg
from corrgress.linalg import (CholeskyFactor, CorrelationState,
                              NotPositiveDefiniteError, assemble_matrix,
                              chol_rank1_modify, is_positive_definite,
                              matrix_dim, move_target_to_last, pair_indices,
                              perturb_offdiagonal, perturb_offdiagonal_chol,
                              try_cholesky, vector_length)


def random_correlation(dim, rng, scale=0.3):
    """A random PD correlation matrix via a normalized random Gram matrix."""
    A = rng.standard_normal((dim + 2, dim))
    S = A.T @ A
    d = np.sqrt(np.diag(S))
    R = S / np.outer(d, d)
    return (1 - scale) * np.eye(dim) + scale * R


def test_pair_ordering_column_major_lower():
    # pairs enumerate the strict lower triangle column by column
    assert pair_indices(4) == [(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2)]
    assert pair_indices(2) == [(1, 0)]


def test_vector_length_matrix_dim_roundtrip():
    for k in range(2, 12):
        assert matrix_dim(vector_length(k)) == k
    with pytest.raises(ValueError):
        matrix_dim(2)


def test_assemble_matrix_places_entries():
    rho = np.array([0.1, 0.2, 0.3])
    R = assemble_matrix(rho, 3)
    expected = np.array([[1.0, 0.1, 0.2],
                         [0.1, 1.0, 0.3],
                         [0.2, 0.3, 1.0]])
    assert np.array_equal(R, expected)


def test_cholesky_known_factor():
    # dim 2 with rho = 0.6: upper factor [[1, .6], [0, .8]]
    f = try_cholesky(assemble_matrix(np.array([0.6]), 2))
    assert np.allclose(f.gamma, [[1.0, 0.6], [0.0, 0.8]])
    assert np.allclose(f.matrix(), assemble_matrix(np.array([0.6]), 2))


def test_cholesky_rejects_indefinite():
    R = assemble_matrix(np.array([0.9, 0.9, -0.9]), 3)
    assert not is_positive_definite(R)
    with pytest.raises(NotPositiveDefiniteError):
        try_cholesky(R)


def test_state_from_matrix_consistency():
    rng = np.random.default_rng(3)
    R = random_correlation(5, rng)
    st_ = CorrelationState.from_matrix(R)
    assert np.allclose(st_.inverse, np.linalg.inv(R))
    assert np.isclose(st_.det, np.linalg.det(R))
    assert np.allclose(st_.matrix, R)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.integers(0, 10_000), st.floats(-0.05, 0.05))
def test_perturb_matches_dense(dim, seed, eps):
    rng = np.random.default_rng(seed)
    R = random_correlation(dim, rng)
    k2 = int(rng.integers(1, dim))
    k1 = int(rng.integers(0, k2))
    Rp = R.copy()
    Rp[k1, k2] += eps
    Rp[k2, k1] += eps
    if not is_positive_definite(Rp):
        return
    state = perturb_offdiagonal(CorrelationState.from_matrix(R), k1, k2, eps)
    assert np.allclose(state.inverse, np.linalg.inv(Rp), atol=1e-10)
    assert np.isclose(state.det, np.linalg.det(Rp), rtol=1e-10)


def test_perturb_chol_three_modifications():
    rng = np.random.default_rng(8)
    R = random_correlation(6, rng)
    for (k1, k2), eps in [((0, 3), 0.04), ((2, 5), -0.03), ((4, 5), 0.02)]:
        f = perturb_offdiagonal_chol(try_cholesky(R), k1, k2, eps)
        Rp = R.copy()
        Rp[k1, k2] += eps
        Rp[k2, k1] += eps
        assert np.allclose(f.gamma.T @ f.gamma, Rp, atol=1e-12)
        assert np.all(np.diag(f.gamma) > 0)


def test_rank1_modify_against_dense():
    rng = np.random.default_rng(11)
    R = random_correlation(4, rng)
    w = 0.2 * rng.standard_normal(4)
    up = chol_rank1_modify(try_cholesky(R), w, +1)
    assert np.allclose(up.gamma.T @ up.gamma, R + np.outer(w, w), atol=1e-12)
    down = chol_rank1_modify(up, w, -1)
    assert np.allclose(down.gamma.T @ down.gamma, R, atol=1e-10)


def test_rank1_downdate_failure_raises():
    f = try_cholesky(np.eye(3))
    with pytest.raises(NotPositiveDefiniteError):
        chol_rank1_modify(f, np.array([2.0, 0.0, 0.0]), -1)


def test_move_target_to_last_is_permutation_factor():
    rng = np.random.default_rng(21)
    R = random_correlation(6, rng)
    f = try_cholesky(R)
    for k1, k2 in [(4, 1), (5, 0), (3, 2)]:
        moved = move_target_to_last(f, k1, k2)
        order = [i for i in range(6) if i not in (k1, k2)] + [k2, k1]
        P = np.eye(6)[:, order]
        assert np.allclose(moved.matrix(), P.T @ R @ P, atol=1e-12)
        assert np.allclose(np.triu(moved.gamma), moved.gamma)
        assert np.all(np.diag(moved.gamma) > 0)


def test_long_update_chain_stays_accurate():
    """Inverse, determinant and factor drift stay tiny over many rank-1 steps."""
    rng = np.random.default_rng(5)
    dim = 6
    R = random_correlation(dim, rng)
    state = CorrelationState.from_matrix(R)
    factor = try_cholesky(R)
    pairs = pair_indices(dim)
    cur = R.copy()
    for _ in range(2000):
        k2, k1 = pairs[rng.integers(len(pairs))]
        eps = rng.uniform(-0.02, 0.02)
        trial = cur.copy()
        trial[k1, k2] += eps
        trial[k2, k1] += eps
        if not is_positive_definite(trial):
            continue
        state = perturb_offdiagonal(state, k1, k2, eps)
        factor = perturb_offdiagonal_chol(factor, k1, k2, eps)
        cur = trial
    assert np.max(np.abs(state.inverse - np.linalg.inv(cur))) < 1e-9
    assert abs(state.det / np.linalg.det(cur) - 1) < 1e-9
    assert np.max(np.abs(factor.matrix() - cur)) < 1e-9
