import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dwtnnr.core import (
    MaskedMatrix,
    full_trace_factors,
    leading_product,
    nuclear_norm,
    project_observed,
    residual_gradient,
    svd_thin,
    trace_surrogate,
    truncate,
)
from dwtnnr.errors import DomainError

from conftest import random_orthonormal_rows


def test_svd_thin_diagonal():
    f = svd_thin(np.diag([3.0, 2.0, 1.0]))
    np.testing.assert_allclose(f.s, [3, 2, 1])
    np.testing.assert_allclose(np.abs(f.U), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(np.abs(f.V), np.eye(3), atol=1e-15)


def test_svd_thin_zero_matrix():
    f = svd_thin(np.zeros((4, 2)))
    np.testing.assert_array_equal(f.s, [0, 0])
    np.testing.assert_allclose(f.U.T @ f.U, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(f.V.T @ f.V, np.eye(2), atol=1e-12)


def test_svd_thin_reconstruction_and_orthonormality(rng):
    X = rng.standard_normal((30, 20))
    f = svd_thin(X)
    assert f.U.shape == (30, 20) and f.V.shape == (20, 20)
    recon = f.U @ np.diag(f.s) @ f.V.T
    assert np.linalg.norm(recon - X) / np.linalg.norm(X) <= 1e-10
    assert np.abs(f.U.T @ f.U - np.eye(20)).max() <= 1e-10
    assert np.abs(f.V.T @ f.V - np.eye(20)).max() <= 1e-10
    assert np.all(np.diff(f.s) <= 0)


def test_svd_thin_deterministic(rng):
    X = rng.standard_normal((12, 9))
    a, b = svd_thin(X), svd_thin(X)
    np.testing.assert_array_equal(a.U, b.U)
    np.testing.assert_array_equal(a.s, b.s)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_svd_thin_rejects_non_finite(bad):
    X = np.ones((3, 3))
    X[1, 2] = bad
    with pytest.raises(DomainError):
        svd_thin(X)


def test_truncate_partitions():
    f = svd_thin(np.diag([5.0, 4.0, 3.0]))
    t0 = truncate(f, 0)
    assert t0.C.shape == (0, 3) and t0.D.shape == (0, 3) and t0.Phi.shape == (3, 3)
    t3 = truncate(f, 3)
    assert t3.Phi.shape == (0, 3) and t3.Lambda.shape == (0, 3)


def test_truncate_rows_match_u_transpose(rng):
    f = svd_thin(rng.standard_normal((7, 5)))
    t = truncate(f, 2)
    np.testing.assert_array_equal(t.C, f.U.T[:2])
    np.testing.assert_array_equal(t.Phi, f.U.T[2:5])
    np.testing.assert_array_equal(np.vstack([t.C, t.Phi]), f.U.T)
    np.testing.assert_array_equal(t.D, f.V.T[:2])
    assert np.abs(t.C @ t.C.T - np.eye(2)).max() <= 1e-10
    assert np.abs(t.D @ t.D.T - np.eye(2)).max() <= 1e-10


def test_truncate_out_of_range():
    f = svd_thin(np.eye(3))
    with pytest.raises(DomainError):
        truncate(f, 4)
    with pytest.raises(DomainError):
        truncate(f, -1)


def test_residual_gradient_diagonal():
    f = svd_thin(np.diag([3.0, 2.0, 1.0]))
    np.testing.assert_allclose(residual_gradient(truncate(f, 1)), np.diag([0.0, 1.0, 1.0]), atol=1e-15)
    np.testing.assert_array_equal(residual_gradient(truncate(f, 3)), np.zeros((3, 3)))


@pytest.mark.parametrize("shape", [(12, 8), (8, 12), (10, 10)])
def test_residual_gradient_matches_padded_brute_force(rng, shape):
    X = rng.standard_normal(shape)
    r = 3
    # brute force: full SVD, B padded/trimmed to m rows, C, D from the same vectors
    A, B = full_trace_factors(X)
    C, D = A[:r], B[:r]
    brute = A.T @ B - C.T @ D
    # sign differences between the two SVD calls cancel inside each u_i v_i^T
    G = residual_gradient(truncate(svd_thin(X), r))
    assert np.abs(G - brute).max() <= 1e-10


def test_leading_plus_residual_is_full_product(rng):
    X = rng.standard_normal((9, 6))
    t = truncate(svd_thin(X), 2)
    A, B = full_trace_factors(X)
    assert np.abs(leading_product(t) + residual_gradient(t) - A.T @ B).max() <= 1e-10


def test_gradient_norm_bounds(rng):
    for shape, r in [((15, 10), 2), ((10, 15), 4), ((8, 8), 8), ((20, 3), 1)]:
        X = rng.standard_normal(shape)
        m = shape[0]
        s = min(shape)
        G = residual_gradient(truncate(svd_thin(X), r))
        norm = np.linalg.norm(G)
        assert norm <= np.sqrt(m) + np.sqrt(r)
        assert norm == pytest.approx(np.sqrt(s - r), abs=1e-10)


def test_residual_gradient_sign_flip_invariance(rng):
    X = rng.standard_normal((9, 7))
    f = svd_thin(X)
    flips = rng.choice([-1.0, 1.0], size=7)
    flipped = type(f)(U=f.U * flips, s=f.s, V=f.V * flips)
    a = residual_gradient(truncate(f, 3))
    b = residual_gradient(truncate(flipped, 3))
    assert np.abs(a - b).max() <= 1e-15


def test_project_observed_cases():
    X = np.array([[9.0, 9.0], [9.0, 9.0]])
    M = MaskedMatrix(np.array([[1.0, 0.0], [0.0, 4.0]]), np.array([[True, False], [False, True]]))
    np.testing.assert_array_equal(project_observed(X, M), [[1, 9], [9, 4]])
    full = MaskedMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]), np.ones((2, 2), bool))
    np.testing.assert_array_equal(project_observed(X, full), full.data)
    none = MaskedMatrix(np.zeros((2, 2)), np.zeros((2, 2), bool))
    np.testing.assert_array_equal(project_observed(X, none), X)


def test_project_observed_shape_mismatch():
    M = MaskedMatrix(np.zeros((2, 2)), np.ones((2, 2), bool))
    with pytest.raises(DomainError):
        project_observed(np.zeros((2, 3)), M)


@settings(max_examples=50, deadline=None)
@given(
    X=arrays(np.float64, (4, 5), elements=st.floats(-1e6, 1e6)),
    data=arrays(np.float64, (4, 5), elements=st.floats(-1e6, 1e6)),
    mask=arrays(np.bool_, (4, 5)),
)
def test_project_observed_idempotent_and_exact(X, data, mask):
    M = MaskedMatrix.from_full(data, mask)
    once = project_observed(X, M)
    twice = project_observed(once, M)
    assert once.tobytes() == twice.tobytes()
    assert once[mask].tobytes() == M.data[mask].tobytes()
    assert once[~mask].tobytes() == X[~mask].tobytes()


def test_masked_matrix_rejects_nonzero_missing():
    with pytest.raises(DomainError):
        MaskedMatrix(np.ones((2, 2)), np.array([[True, False], [True, True]]))


def test_nuclear_norm():
    assert nuclear_norm(np.diag([3.0, 2.0, 1.0])) == pytest.approx(6.0)
    assert nuclear_norm(np.zeros((3, 4))) == 0.0


def test_nuclear_norm_matches_trace_identity(rng):
    X = rng.standard_normal((10, 10))
    A, B = full_trace_factors(X)
    assert abs(nuclear_norm(X) - np.trace(A @ X @ B.T)) <= 1e-8


def test_trace_surrogate_examples(rng):
    X = np.diag([3.0, 2.0, 1.0])
    t = truncate(svd_thin(X), 2)
    assert trace_surrogate(X, t.C, t.D) == pytest.approx(5.0)
    t0 = truncate(svd_thin(X), 0)
    assert trace_surrogate(X, t0.C, t0.D) == 0.0
    Y = rng.standard_normal((20, 15))
    f = svd_thin(Y)
    t4 = truncate(f, 4)
    assert abs(trace_surrogate(Y, t4.C, t4.D) - f.s[:4].sum()) <= 1e-8


def test_trace_surrogate_shape_mismatch():
    with pytest.raises(DomainError):
        trace_surrogate(np.eye(3), np.ones((1, 2)), np.ones((1, 3)))


@pytest.mark.parametrize("shape", [(12, 8), (8, 12)])
def test_von_neumann_inequality_random_orthogonal(rng, shape):
    m, n = shape
    X = rng.standard_normal(shape)
    bound = nuclear_norm(X)
    for _ in range(20):
        A = random_orthonormal_rows(rng, m, m)
        V = random_orthonormal_rows(rng, n, n).T
        B = np.vstack([V.T, np.zeros((m - n, n))]) if m >= n else V.T[:m]
        assert np.trace(A @ X @ B.T) <= bound + 1e-8
