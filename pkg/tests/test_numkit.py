import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weighted_gc.errors import InvalidDistributionError, InvalidInputError, RankDeficiencyError
from weighted_gc.numkit import as_cmat, as_mat, leverage_scores, normalize_scores, reduced_svd


def projector_diagonal(X):
    # independent route: diag(X (X^T X)^{-1} X^T) without any SVD
    return np.einsum("ij,ji->i", X, np.linalg.solve(X.T @ X, X.T))


@pytest.mark.parametrize("method", ["jacobi", "lapack"])
def test_svd_identity(method):
    U, s, V = reduced_svd(np.eye(3), method=method)
    np.testing.assert_allclose(s, np.ones(3))
    np.testing.assert_allclose(np.abs(U), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(U * s @ V.T, np.eye(3), atol=1e-15)


@pytest.mark.parametrize("method", ["jacobi", "lapack"])
def test_svd_diagonal_is_reordered(method):
    _, s, _ = reduced_svd([[3, 0], [0, 4], [0, 0]], method=method)
    np.testing.assert_allclose(s, [4, 3], rtol=1e-15)


@pytest.mark.parametrize("shape", [(8, 3), (40, 7), (300, 120), (5, 5), (9, 1)])
def test_jacobi_reconstruction(rng, shape):
    X = rng.standard_normal(shape)
    U, s, V = reduced_svd(X, method="jacobi")
    p = shape[1]
    assert np.linalg.norm(X - U * s @ V.T) / np.linalg.norm(X) <= 1e-10
    assert np.abs(U.T @ U - np.eye(p)).max() <= 1e-10
    assert np.all(np.diff(s) <= 0)
    np.testing.assert_allclose(s, np.linalg.svd(X, compute_uv=False), rtol=1e-10)


def test_round_trip_at_largest_shape(rng):
    X = rng.standard_normal((2000, 800))
    U, s, V = reduced_svd(X)
    assert np.linalg.norm(X - U * s @ V.T) / np.linalg.norm(X) <= 1e-10
    assert np.abs(U.T @ U - np.eye(800)).max() <= 1e-10


def test_jacobi_rank_deficient_keeps_orthonormal_u(rng):
    X = rng.standard_normal((30, 6))
    X[:, 5] = X[:, 0] - 2 * X[:, 3]
    U, s, V = reduced_svd(X, method="jacobi")
    assert s[-1] < 1e-12 * s[0]
    assert np.abs(U.T @ U - np.eye(6)).max() < 1e-12
    assert np.abs(V.T @ V - np.eye(6)).max() < 1e-10
    assert np.linalg.norm(X - U * s @ V.T) < 1e-12 * np.linalg.norm(X)


def test_svd_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        reduced_svd([[1.0, np.nan], [0, 1]])
    with pytest.raises(InvalidInputError):
        reduced_svd(np.ones((2, 3)))
    with pytest.raises(InvalidInputError):
        reduced_svd(np.eye(2), method="qr")


def test_leverage_examples():
    np.testing.assert_allclose(leverage_scores(np.eye(4)), np.ones(4), atol=1e-15)
    # P = [[1/2, 1/2], [1/2, 1/2]]
    np.testing.assert_allclose(leverage_scores([[1.0], [1.0]]), [0.5, 0.5], atol=1e-15)


def test_leverage_matches_projector(rng):
    X = rng.standard_normal((10, 3))
    np.testing.assert_allclose(leverage_scores(X), projector_diagonal(X), atol=1e-8)


def test_leverage_rank_deficiency_names_rank(rng):
    X = rng.standard_normal((12, 4))
    X[:, 2] = 0.0
    with pytest.raises(RankDeficiencyError, match="rank 3"):
        leverage_scores(X)
    ell = leverage_scores(X, allow_rank_deficient=True)
    np.testing.assert_allclose(ell, projector_diagonal(X[:, [0, 1, 3]]), atol=1e-10)


def test_normalize_examples(rng):
    np.testing.assert_allclose(normalize_scores([1, 1, 1, 1]), [0.25] * 4)
    np.testing.assert_allclose(normalize_scores([1, 3]), [0.25, 0.75])
    ell = leverage_scores(rng.standard_normal((10, 3)))
    pi = normalize_scores(ell)
    assert abs(pi.sum() - 1) <= 1e-12
    np.testing.assert_allclose(pi * ell.sum(), ell, rtol=1e-12)
    with pytest.raises(InvalidDistributionError):
        normalize_scores([0, 0, 0])
    with pytest.raises(InvalidDistributionError):
        normalize_scores([1, -1, 2])


def test_matrix_constructors():
    assert as_mat([[1, 2]]).dtype == np.float64
    assert as_cmat([[1j]]).dtype == np.complex128
    with pytest.raises(InvalidInputError):
        as_cmat([[complex(0, np.inf)]])
    with pytest.raises(InvalidInputError):
        as_mat([1, 2])


shapes = st.tuples(st.integers(4, 40), st.integers(1, 6)).filter(lambda t: t[0] >= t[1])


@settings(max_examples=40, deadline=None)
@given(shape=shapes, seed=st.integers(0, 2**32 - 1))
def test_leverage_invariants(shape, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal(shape)
    R = rng.standard_normal((shape[1], shape[1])) + 3 * np.eye(shape[1])
    ell = leverage_scores(X)
    assert abs(ell.sum() - shape[1]) <= 1e-8
    assert np.all((ell >= 0) & (ell <= 1))
    np.testing.assert_allclose(leverage_scores(X @ R), ell, atol=1e-8)
