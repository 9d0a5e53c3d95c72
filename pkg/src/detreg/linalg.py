"""Dense linear-algebra helpers: complements, projectors, structured inverses.

All functions accept and return plain ``numpy`` arrays. A zero-column ``W``
(no parametric part) is accepted everywhere and behaves like the empty span.
"""

from typing import NamedTuple

import numpy as np

from .errors import RankDeficient, SingularReducedSystem

RANK_TOL = 1e-10
PINV_RCOND = 1e-12


def _as_matrix(W):
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    return W


def is_full_column_rank(W, tol=RANK_TOL):
    """True when sigma_min(W) > tol * sigma_max(W)."""
    W = _as_matrix(W)
    n, m = W.shape
    if m == 0:
        return True
    if n < m:
        return False
    s = np.linalg.svd(W, compute_uv=False)
    return bool(s[0] > 0 and s[-1] > tol * s[0])


def _check_rank(W, tol):
    if not is_full_column_rank(W, tol):
        raise RankDeficient(f"matrix of shape {W.shape} is not full column rank (tol={tol:g})")


def orthonormal_basis(W, tol=RANK_TOL):
    """Orthonormal basis of the column space of a full-column-rank ``W``."""
    W = _as_matrix(W)
    _check_rank(W, tol)
    if W.shape[1] == 0:
        return np.zeros((W.shape[0], 0))
    Q, _ = np.linalg.qr(W, mode="reduced")
    return Q


def orthonormal_complement_basis(W, tol=RANK_TOL):
    """Orthonormal basis of the orthogonal complement of range(W), via full QR.

    Returns an ``n x (n - m)`` matrix ``B`` with ``B.T @ W == 0`` and
    ``B @ B.T == I - P_W``. ``n == m`` yields an ``n x 0`` array.
    """
    W = _as_matrix(W)
    n, m = W.shape
    _check_rank(W, tol)
    if m == 0:
        return np.eye(n)
    Q, _ = np.linalg.qr(W, mode="complete")
    return Q[:, m:]


def projector(W, tol=RANK_TOL):
    """Orthogonal projector ``W (W^T W)^{-1} W^T`` onto range(W)."""
    Q = orthonormal_basis(W, tol)
    return Q @ Q.T


def complement_projector(W, tol=RANK_TOL):
    W = _as_matrix(W)
    return np.eye(W.shape[0]) - projector(W, tol)


def pinv(A, rcond=PINV_RCOND):
    """Moore-Penrose pseudo-inverse with relative singular-value cutoff."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros(A.T.shape)
    return np.linalg.pinv(A, rcond=rcond)


def psd_pinv(M, rcond=PINV_RCOND):
    """Pseudo-inverse of a symmetric matrix by eigendecomposition.

    Eigenvalues at or below ``rcond * max|eig|`` are treated as zero.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros_like(M)
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    cutoff = rcond * max(np.abs(w).max(), 0.0)
    keep = np.abs(w) > cutoff
    if not keep.any():
        return np.zeros_like(M)
    return (U[:, keep] / w[keep]) @ U[:, keep].T


def structured_pinv(S, M, rcond=PINV_RCOND):
    """``(S M S^T)^+`` computed as ``S M^+ S^T`` for ``S`` with orthonormal columns."""
    S = _as_matrix(S)
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if S.shape[1] != M.shape[0] or M.shape[0] != M.shape[1]:
        raise ValueError(f"dimension mismatch: S {S.shape}, M {M.shape}")
    return S @ pinv(M, rcond) @ S.T


def is_invertible(M, tol=RANK_TOL):
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return True
    s = np.linalg.svd(M, compute_uv=False)
    return bool(s[0] > 0 and s[-1] > tol * s[0])


class SaddleInverse(NamedTuple):
    """The four blocks of the inverse of ``[[A, W], [W^T, 0]]``."""

    top_left: np.ndarray
    top_right: np.ndarray
    bottom_left: np.ndarray
    bottom_right: np.ndarray

    def assemble(self):
        return np.block([[self.top_left, self.top_right], [self.bottom_left, self.bottom_right]])


def saddle_matrix(A, W):
    A = np.asarray(A, dtype=float)
    W = _as_matrix(W)
    m = W.shape[1]
    return np.block([[A, W], [W.T, np.zeros((m, m))]])


def saddle_block_inverse(A, W, tol=RANK_TOL):
    """Blockwise inverse of the saddle matrix ``[[A, W], [W^T, 0]]``.

    With ``B`` an orthonormal complement of ``W`` and ``G = B (B^T A B)^{-1} B^T``
    (which equals ``(P A P)^+`` for ``P = I - P_W``)::

        [[ G,                   (I - G A) W^{+T}           ],
         [ W^+ (I - A G),       -W^+ (A - A G A) W^{+T}    ]]

    Raises ``SingularReducedSystem`` if ``B^T A B`` is singular at ``tol``.
    """
    A = np.asarray(A, dtype=float)
    W = _as_matrix(W)
    n = A.shape[0]
    B = orthonormal_complement_basis(W, tol)
    reduced = B.T @ A @ B
    if not is_invertible(reduced, tol):
        raise SingularReducedSystem("B^T A B is singular; the saddle matrix is not invertible")
    G = B @ np.linalg.solve(reduced, B.T) if B.shape[1] else np.zeros((n, n))
    W_pinv = pinv(W)
    eye = np.eye(n)
    return SaddleInverse(
        top_left=G,
        top_right=(eye - G @ A) @ W_pinv.T,
        bottom_left=W_pinv @ (eye - A @ G),
        bottom_right=-W_pinv @ (A - A @ G @ A) @ W_pinv.T,
    )


def log_det_psd(M):
    """log det of a symmetric PSD matrix; ``-inf`` when singular. Empty -> 0."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    sign, logdet = np.linalg.slogdet(M)
    if sign <= 0:
        return -np.inf
    return float(logdet)


def adjugate(M):
    """Classical adjugate ``adj(M)`` (so ``M adj(M) = det(M) I``), valid for singular ``M``.

    Computed from the SVD ``M = U diag(s) W^T`` as
    ``det(U) det(W) W diag(prod_{j != i} s_j) U^T``.
    """
    M = np.asarray(M, dtype=float)
    m = M.shape[0]
    if m == 0:
        return np.zeros((0, 0))
    if m == 1:
        return np.ones((1, 1))
    U, s, Wt = np.linalg.svd(M)
    others = np.array([np.prod(np.delete(s, i)) for i in range(m)])
    sign = np.linalg.det(U) * np.linalg.det(Wt)
    return sign * (Wt.T * others) @ U.T
