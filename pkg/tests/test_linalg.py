import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from detreg import linalg
from detreg.errors import RankDeficient, SingularReducedSystem


def random_full_rank(seed, n, m):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, m))


def test_complement_of_first_axis():
    B = linalg.orthonormal_complement_basis(np.array([[1.0], [0.0]]))
    assert B.shape == (2, 1)
    assert np.allclose(np.abs(B[:, 0]), [0.0, 1.0])


def test_complement_of_ones():
    B = linalg.orthonormal_complement_basis(np.ones((2, 1)))
    assert np.allclose(np.abs(B[:, 0]), [2 ** -0.5, 2 ** -0.5])
    assert B[0, 0] == pytest.approx(-B[1, 0])


def test_complement_of_truncated_identity():
    B = linalg.orthonormal_complement_basis(np.eye(3)[:, :2])
    assert np.allclose(np.abs(B[:, 0]), [0, 0, 1])


def test_complement_rejects_rank_deficient():
    with pytest.raises(RankDeficient):
        linalg.orthonormal_complement_basis(np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]))


def test_complement_of_empty_span_is_identity():
    assert np.array_equal(linalg.orthonormal_complement_basis(np.zeros((3, 0))), np.eye(3))


def test_projector_examples():
    assert np.allclose(linalg.projector(np.ones((2, 1))), 0.5 * np.ones((2, 2)))
    assert np.allclose(linalg.projector(np.eye(4)), np.eye(4))
    assert np.allclose(linalg.projector(np.array([1.0, 0.0, 0.0])), np.diag([1.0, 0, 0]))


def test_projector_rank_deficient():
    with pytest.raises(RankDeficient):
        linalg.projector(np.zeros((3, 1)))


def test_structured_pinv_examples():
    assert np.allclose(linalg.structured_pinv(np.eye(2), np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    e1 = np.array([[1.0], [0.0]])
    assert np.allclose(linalg.structured_pinv(e1, [[4.0]]), [[0.25, 0], [0, 0]])
    S = linalg.orthonormal_basis(random_full_rank(0, 5, 3))
    assert np.array_equal(linalg.structured_pinv(S, np.zeros((3, 3))), np.zeros((5, 5)))


def test_structured_pinv_dimension_mismatch():
    with pytest.raises(ValueError):
        linalg.structured_pinv(np.eye(3)[:, :2], np.eye(3))


def test_saddle_inverse_ones():
    blocks = linalg.saddle_block_inverse(np.eye(2), np.ones((2, 1)))
    P_perp = np.array([[0.5, -0.5], [-0.5, 0.5]])
    assert np.allclose(blocks.top_left, P_perp)
    assert blocks.bottom_right[0, 0] == pytest.approx(-0.5)


def test_saddle_inverse_diagonal_case():
    # hand computation: the complement of e1 is spanned by e2, e3, so the top-left block
    # is diag(0, 1/2, 1/3)
    A = np.diag([1.0, 2.0, 3.0])
    W = np.array([[1.0], [0.0], [0.0]])
    blocks = linalg.saddle_block_inverse(A, W)
    assert np.allclose(blocks.top_left, np.diag([0.0, 0.5, 1.0 / 3.0]))
    M = linalg.saddle_matrix(A, W)
    assert np.allclose(blocks.assemble() @ M, np.eye(4))


def test_saddle_inverse_singular_reduced():
    A = np.diag([1.0, 0.0])
    with pytest.raises(SingularReducedSystem):
        linalg.saddle_block_inverse(A, np.array([[1.0], [0.0]]))


def test_adjugate_matches_inverse_and_singular():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((4, 4))
    assert np.allclose(linalg.adjugate(M), np.linalg.det(M) * np.linalg.inv(M))
    S = np.array([[1.0, 2.0], [2.0, 4.0]])
    assert np.allclose(linalg.adjugate(S), [[4.0, -2.0], [-2.0, 1.0]])


def test_log_det_psd():
    assert linalg.log_det_psd(np.diag([2.0, 3.0])) == pytest.approx(np.log(6.0))
    assert linalg.log_det_psd(np.diag([1.0, 0.0])) == -np.inf
    assert linalg.log_det_psd(np.zeros((0, 0))) == 0.0


dims = st.integers(2, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1), st.integers(0, 10 ** 6)))


@settings(max_examples=40, deadline=None)
@given(dims)
def test_projector_properties(nms):
    n, m, seed = nms
    W = random_full_rank(seed, n, m)
    P = linalg.projector(W)
    assert np.allclose(P @ P, P, atol=1e-10)
    assert np.allclose(P, P.T, atol=1e-10)
    assert np.allclose(P @ W, W, atol=1e-10)
    B = linalg.orthonormal_complement_basis(W)
    assert np.allclose(B @ B.T + P, np.eye(n), atol=1e-10)
    assert np.allclose(B.T @ W, 0, atol=1e-10)
    assert np.allclose(B.T @ B, np.eye(n - m), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(dims)
def test_structured_pinv_matches_svd_pinv(nms):
    n, k, seed = nms
    rng = np.random.default_rng(seed)
    S = linalg.orthonormal_basis(rng.standard_normal((n, k)))
    R = rng.standard_normal((k, k))
    M = R @ R.T if seed % 2 else R
    if seed % 3 == 0 and k > 1:
        M[:, 0] = 0.0
    X = linalg.structured_pinv(S, M)
    A = S @ M @ S.T
    assert np.allclose(X, np.linalg.pinv(A), atol=1e-8)
    # the four Moore-Penrose criteria
    assert np.allclose(A @ X @ A, A, atol=1e-8)
    assert np.allclose(X @ A @ X, X, atol=1e-8)
    assert np.allclose((A @ X).T, A @ X, atol=1e-8)
    assert np.allclose((X @ A).T, X @ A, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(dims)
def test_saddle_block_inverse_is_inverse(nms):
    n, m, seed = nms
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((n, m))
    R = rng.standard_normal((n, n))
    A = R + R.T if seed % 2 else R @ R.T
    B = linalg.orthonormal_complement_basis(W)
    if not linalg.is_invertible(B.T @ A @ B, 1e-6):
        return
    blocks = linalg.saddle_block_inverse(A, W)
    assert np.allclose(blocks.assemble() @ linalg.saddle_matrix(A, W), np.eye(n + m), atol=1e-8)
    P = np.eye(n) - linalg.projector(W)
    assert np.allclose(blocks.top_left, np.linalg.pinv(P @ A @ P), atol=1e-8)
