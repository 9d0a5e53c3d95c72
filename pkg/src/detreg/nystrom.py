"""Projected Nyström approximation of the projected kernel and its error."""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .dpp import as_subset
from .errors import RankDeficient, RankDeficientVC, SubsetTooSmall, ZeroProjectedKernel

XI_RCOND = 1e-12


@dataclass(frozen=True, eq=False)
class NystromFactor:
    """``Lt(C) = cross @ pinv(Xi) @ cross.T`` kept in factored form.

    ``root`` satisfies ``root @ root.T == Lt(C)``; its width is ``lowrank_rank``.
    """

    subset: tuple
    B_C: np.ndarray
    Xi: np.ndarray
    cross: np.ndarray
    lowrank_rank: int
    root: np.ndarray

    def materialize(self):
        return self.root @ self.root.T


def complement_of_subset_basis(V, C):
    """``B(C)``: orthonormal complement of ``V_C`` (raises if V_C is rank deficient)."""
    try:
        return linalg.orthonormal_complement_basis(V[list(C)])
    except RankDeficient as exc:
        raise RankDeficientVC(str(exc)) from None


def _factor(subset, B, Xi, cross):
    w, U = np.linalg.eigh(0.5 * (Xi + Xi.T))
    cutoff = XI_RCOND * max(np.abs(w).max(initial=0.0), 0.0)
    keep = w > cutoff
    root = (cross @ U[:, keep]) / np.sqrt(w[keep])
    return NystromFactor(subset=subset, B_C=B, Xi=Xi, cross=cross,
                         lowrank_rank=int(keep.sum()), root=root)


def projected_nystrom(nnp, C, B=None):
    """Build the factor from ``V_C``, ``K_CC`` and the ``n x k`` slab ``K[:, C]``.

    ``B`` may override the complement basis of ``V_C`` (any orthonormal
    basis of the same subspace yields the same approximation).
    """
    C = as_subset(C)
    k, p = len(C), nnp.p
    if k <= p:
        raise SubsetTooSmall(f"|C| = {k} must exceed p = {p}")
    idx = list(C)
    if B is None:
        B = complement_of_subset_basis(nnp.V, idx)
    elif not linalg.is_full_column_rank(nnp.V[idx]):
        raise RankDeficientVC("V_C is not full column rank")
    K_C = nnp.K[:, idx]
    Xi = B.T @ K_C[idx] @ B
    cross = nnp.project_perp(K_C @ B)
    return _factor(C, B, 0.5 * (Xi + Xi.T), cross)


def common_nystrom(K, C):
    """Classic Nyström matrix ``K[:, C] pinv(K_CC) K[C, :]``."""
    K = np.asarray(K, dtype=float)
    idx = list(as_subset(C))
    if not idx:
        return np.zeros_like(K)
    K_C = K[:, idx]
    return K_C @ linalg.psd_pinv(K_C[idx]) @ K_C.T


def nystrom_relative_error(nnp, factor):
    """``||K_tilde - Lt(C)||_F / ||K_tilde||_F``."""
    denom = np.linalg.norm(nnp.K_tilde, "fro")
    if denom <= XI_RCOND * np.linalg.norm(nnp.K, "fro"):
        raise ZeroProjectedKernel("projected kernel is numerically zero")
    return float(np.linalg.norm(nnp.K_tilde - factor.materialize(), "fro") / denom)


def projected_nystrom_matrix(nnp, C):
    """Materialized ``Lt(C)`` with the convention ``Lt(C) = 0`` when ``|C| = p``."""
    if len(C) == nnp.p:
        return np.zeros((nnp.n, nnp.n))
    return projected_nystrom(nnp, C).materialize()
